/*
 Copyright 2026 The pvdfl Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace pvdfl {

/// Column offsets of the scheduling variables. Each hourly block holds
/// `horizon` columns, the SoC block holds `horizon + 1`.
struct VariableLayout {
  std::size_t horizon = 0;

  std::size_t p_im(std::size_t t) const noexcept { return t; }
  std::size_t p_ex(std::size_t t) const noexcept { return horizon + t; }
  std::size_t p_ch(std::size_t t) const noexcept { return 2 * horizon + t; }
  std::size_t p_dis(std::size_t t) const noexcept { return 3 * horizon + t; }
  std::size_t mode(std::size_t t) const noexcept { return 4 * horizon + t; }
  std::size_t soc(std::size_t t) const noexcept { return 5 * horizon + t; }
  std::size_t variable_count() const noexcept { return 6 * horizon + 1; }

  /// Block name owning a column ("p_im", ..., "soc").
  const char* block_of(std::size_t column) const;
};

/// minimize 0.5 x'diag(quad_diag)x + cost'x  s.t.  A x = b,  G x <= h.
///
/// The equality rows are ordered: energy balance (horizon rows), initial SoC,
/// SoC dynamics (horizon rows), terminal SoC. Inequality rows are ordered:
/// non-negativity of p_im, p_ex, p_ch, p_dis; charge limit; discharge limit;
/// mode >= 0; mode <= 1; SoC lower bound (horizon + 1 rows); SoC upper bound
/// (horizon + 1 rows).
struct StandardFormLP {
  Eigen::VectorXd cost_vector;
  Eigen::VectorXd quad_diag;
  Eigen::MatrixXd equality_matrix;
  Eigen::VectorXd equality_rhs;
  Eigen::MatrixXd inequality_matrix;
  Eigen::VectorXd inequality_rhs;
  std::size_t variable_count = 0;
  VariableLayout variable_layout;

  std::size_t balance_row(std::size_t t) const noexcept { return t; }

  bool is_pure_lp() const noexcept { return quad_diag.size() == 0 || quad_diag.isZero(0.0); }

  /// Empty string when dimensions and layout are consistent.
  std::string check_dimensions() const;
};

/// Plain-text dump: header with dimensions, then row-major blocks.
void write_lp_dump(std::ostream& out, const StandardFormLP& lp);
StandardFormLP read_lp_dump(std::istream& in);

/// Compressed row view of a dense matrix, used for the cheap products inside
/// the interior-point iterations.
struct SparseRows {
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> col;
  std::vector<double> val;
  std::size_t rows = 0, cols = 0;

  static SparseRows from_dense(const Eigen::MatrixXd& m);
  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;           // out = M x
  void multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const;  // out = M' y
};

}  // namespace pvdfl
