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

#include "lp.hpp"

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "error.hpp"

namespace pvdfl {

const char* VariableLayout::block_of(std::size_t column) const {
  static const char* names[] = {"p_im", "p_ex", "p_ch", "p_dis", "mode", "soc"};
  const std::size_t block = column / horizon;
  return names[block < 5 ? block : 5];
}

std::string StandardFormLP::check_dimensions() const {
  const auto n = static_cast<Eigen::Index>(variable_count);
  if (variable_layout.variable_count() != variable_count) return "variable_layout does not cover every column";
  if (cost_vector.size() != n) return "cost_vector size mismatch";
  if (quad_diag.size() != 0 && quad_diag.size() != n) return "quad_diag size mismatch";
  if (equality_matrix.cols() != n || equality_matrix.rows() != equality_rhs.size())
    return "equality block dimension mismatch";
  if (inequality_matrix.cols() != n || inequality_matrix.rows() != inequality_rhs.size())
    return "inequality block dimension mismatch";
  return {};
}

namespace {

void write_block(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd read_block(std::istream& in, const std::string& expected) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expected)
    fail(ErrorCode::ParseError, "lp-dump: expected block '" + expected + "'");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c))) fail(ErrorCode::ParseError, "lp-dump: truncated block '" + expected + "'");
  return m;
}

}  // namespace

void write_lp_dump(std::ostream& out, const StandardFormLP& lp) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "lp-dump 1\n";
  out << "variables " << lp.variable_count << " horizon " << lp.variable_layout.horizon << " equalities "
      << lp.equality_matrix.rows() << " inequalities " << lp.inequality_matrix.rows() << '\n';
  const Eigen::VectorXd quad = lp.quad_diag.size() ? lp.quad_diag : Eigen::VectorXd::Zero(lp.variable_count);
  write_block(out, "cost", lp.cost_vector.transpose());
  write_block(out, "quad_diag", quad.transpose());
  write_block(out, "A_eq", lp.equality_matrix);
  write_block(out, "b_eq", lp.equality_rhs.transpose());
  write_block(out, "G", lp.inequality_matrix);
  write_block(out, "h", lp.inequality_rhs.transpose());
}

StandardFormLP read_lp_dump(std::istream& in) {
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != "lp-dump" || version != 1)
    fail(ErrorCode::ParseError, "lp-dump: bad header");
  std::size_t n = 0, horizon = 0, meq = 0, mineq = 0;
  std::string k1, k2, k3, k4;
  if (!(in >> k1 >> n >> k2 >> horizon >> k3 >> meq >> k4 >> mineq))
    fail(ErrorCode::ParseError, "lp-dump: bad dimension line");
  StandardFormLP lp;
  lp.variable_count = n;
  lp.variable_layout.horizon = horizon;
  lp.cost_vector = read_block(in, "cost").transpose();
  lp.quad_diag = read_block(in, "quad_diag").transpose();
  lp.equality_matrix = read_block(in, "A_eq");
  lp.equality_rhs = read_block(in, "b_eq").transpose();
  lp.inequality_matrix = read_block(in, "G");
  lp.inequality_rhs = read_block(in, "h").transpose();
  if (static_cast<std::size_t>(lp.equality_matrix.rows()) != meq ||
      static_cast<std::size_t>(lp.inequality_matrix.rows()) != mineq)
    fail(ErrorCode::ParseError, "lp-dump: header dimensions disagree with blocks");
  if (const auto err = lp.check_dimensions(); !err.empty()) fail(ErrorCode::ParseError, "lp-dump: " + err);
  return lp;
}

SparseRows SparseRows::from_dense(const Eigen::MatrixXd& m) {
  SparseRows s;
  s.rows = static_cast<std::size_t>(m.rows());
  s.cols = static_cast<std::size_t>(m.cols());
  s.row_start.reserve(s.rows + 1);
  s.row_start.push_back(0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) {
        s.col.push_back(static_cast<std::size_t>(c));
        s.val.push_back(m(r, c));
      }
    s.row_start.push_back(s.col.size());
  }
  return s;
}

void SparseRows::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) acc += val[k] * x[static_cast<Eigen::Index>(col[k])];
    out[static_cast<Eigen::Index>(r)] = acc;
  }
}

void SparseRows::multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
  out.setZero(static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[static_cast<Eigen::Index>(r)];
    if (yr == 0.0) continue;
    for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) out[static_cast<Eigen::Index>(col[k])] += val[k] * yr;
  }
}

}  // namespace pvdfl
