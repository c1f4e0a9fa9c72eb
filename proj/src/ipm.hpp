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
#include <memory>
#include <optional>
#include <vector>

#include "lp.hpp"

namespace pvdfl {

/// Sparsity information shared by every Newton system of one problem: row
/// views of A and G, and the partition of the columns into the independent
/// blocks of Q + G'WG (columns coupled through a common inequality row).
struct KktPattern {
  SparseRows a_rows;
  SparseRows g_rows;
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::size_t> block_of;
  std::vector<std::size_t> pos_in_block;

  static KktPattern from(const StandardFormLP& lp);
};

/// Factorization of the reduced Newton/KKT system
///
///   [ Q + G' W G + d I    A'  ] [dx]   [rx]
///   [ A                  -d I ] [dy] = [ry]
///
/// with W = diag(w) > 0 and damping d >= 0. The (1,1) block is factorized
/// block by block; the equality rows are eliminated through a dense Schur
/// complement. The interior-point iterations and the sensitivity solves share
/// this object.
class ReducedKkt {
 public:
  static std::optional<ReducedKkt> factorize(const StandardFormLP& lp, std::shared_ptr<const KktPattern> pattern,
                                             const Eigen::VectorXd& w, double damping);

  void solve(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry, Eigen::VectorXd& dx, Eigen::VectorXd& dy) const;

  double damping() const noexcept { return damping_; }

 private:
  ReducedKkt() = default;
  void solve_once(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry, Eigen::VectorXd& dx,
                  Eigen::VectorXd& dy) const;
  void apply_h(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  void solve_h(Eigen::VectorXd& x) const;

  std::shared_ptr<const KktPattern> pattern_;
  // Blocks of H and their Cholesky factors, each stored densely (k*k,
  // row-major) at block_offset_[b] in the flat arrays.
  std::vector<std::size_t> block_offset_;
  std::vector<double> h_;
  std::vector<double> chol_;
  Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  double damping_ = 0.0;
};

struct QpSettings {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

struct QpSolution {
  Eigen::VectorXd x;  // primal
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd z;  // inequality multipliers, >= 0
  Eigen::VectorXd s;  // inequality slacks, h - G x >= 0
  double objective = 0.0;
  int iterations = 0;
};

/// Mehrotra predictor-corrector primal-dual interior-point method.
/// Throws MaxIterations, or Infeasible on numerical breakdown.
QpSolution solve_qp(const StandardFormLP& lp, const QpSettings& settings = {});
QpSolution solve_qp(const StandardFormLP& lp, const std::shared_ptr<const KktPattern>& pattern,
                    const QpSettings& settings);

}  // namespace pvdfl
