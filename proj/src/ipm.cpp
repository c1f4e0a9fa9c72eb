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

#include "ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace pvdfl {

KktPattern KktPattern::from(const StandardFormLP& lp) {
  KktPattern p;
  p.a_rows = SparseRows::from_dense(lp.equality_matrix);
  p.g_rows = SparseRows::from_dense(lp.inequality_matrix);
  const std::size_t n = lp.variable_count;
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  const auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t r = 0; r < p.g_rows.rows; ++r)
    for (std::size_t k = p.g_rows.row_start[r] + 1; k < p.g_rows.row_start[r + 1]; ++k) {
      const std::size_t a = find(p.g_rows.col[p.g_rows.row_start[r]]), b = find(p.g_rows.col[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  p.block_of.assign(n, 0);
  p.pos_in_block.assign(n, 0);
  std::vector<std::size_t> block_of_root(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (block_of_root[root] == n) {
      block_of_root[root] = p.blocks.size();
      p.blocks.emplace_back();
    }
    auto& block = p.blocks[block_of_root[root]];
    p.block_of[i] = block_of_root[root];
    p.pos_in_block[i] = block.size();
    block.push_back(i);
  }
  return p;
}

namespace {

// In-place dense Cholesky of a small row-major k x k block (lower factor).
bool small_cholesky(double* m, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) {
    double d = m[j * k + j];
    for (std::size_t p = 0; p < j; ++p) d -= m[j * k + p] * m[j * k + p];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    m[j * k + j] = d;
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = m[i * k + j];
      for (std::size_t p = 0; p < j; ++p) v -= m[i * k + p] * m[j * k + p];
      m[i * k + j] = v / d;
    }
  }
  return true;
}

void small_cholesky_solve(const double* l, std::size_t k, double* x) {
  for (std::size_t i = 0; i < k; ++i) {
    double v = x[i];
    for (std::size_t p = 0; p < i; ++p) v -= l[i * k + p] * x[p];
    x[i] = v / l[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    double v = x[i];
    for (std::size_t p = i + 1; p < k; ++p) v -= l[p * k + i] * x[p];
    x[i] = v / l[i * k + i];
  }
}

}  // namespace

std::optional<ReducedKkt> ReducedKkt::factorize(const StandardFormLP& lp, std::shared_ptr<const KktPattern> pattern,
                                                const Eigen::VectorXd& w, double damping) {
  const KktPattern& pat = *pattern;
  const auto n = static_cast<Eigen::Index>(lp.variable_count);
  const bool has_quad = lp.quad_diag.size() == n;
  ReducedKkt kkt;
  kkt.damping_ = damping;
  kkt.block_offset_.reserve(pat.blocks.size() + 1);
  std::size_t total = 0;
  for (const auto& cols : pat.blocks) {
    kkt.block_offset_.push_back(total);
    total += cols.size() * cols.size();
  }
  kkt.block_offset_.push_back(total);
  kkt.h_.assign(total, 0.0);
  for (std::size_t b = 0; b < pat.blocks.size(); ++b) {
    const auto& cols = pat.blocks[b];
    const std::size_t k = cols.size();
    for (std::size_t i = 0; i < k; ++i)
      kkt.h_[kkt.block_offset_[b] + i * k + i] =
          damping + (has_quad ? lp.quad_diag[static_cast<Eigen::Index>(cols[i])] : 0.0);
  }
  const SparseRows& g = pat.g_rows;
  for (std::size_t r = 0; r < g.rows; ++r) {
    if (g.row_start[r] == g.row_start[r + 1]) continue;
    const double wr = w[static_cast<Eigen::Index>(r)];
    const std::size_t b = pat.block_of[g.col[g.row_start[r]]];
    const std::size_t k = pat.blocks[b].size();
    double* block = kkt.h_.data() + kkt.block_offset_[b];
    for (std::size_t i = g.row_start[r]; i < g.row_start[r + 1]; ++i)
      for (std::size_t j = g.row_start[r]; j < g.row_start[r + 1]; ++j)
        block[pat.pos_in_block[g.col[i]] * k + pat.pos_in_block[g.col[j]]] += wr * g.val[i] * g.val[j];
  }
  kkt.chol_ = kkt.h_;
  for (std::size_t b = 0; b < pat.blocks.size(); ++b)
    if (!small_cholesky(kkt.chol_.data() + kkt.block_offset_[b], pat.blocks[b].size())) return std::nullopt;
  kkt.pattern_ = std::move(pattern);

  // V = H^-1 A' (column by column over the equality rows), S = A V + d I.
  const SparseRows& ar = pat.a_rows;
  const auto meq = static_cast<Eigen::Index>(ar.rows);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, meq);
  std::vector<double> local;
  for (std::size_t r = 0; r < ar.rows; ++r) {
    // Columns of row r may span several blocks; solve each touched block.
    for (std::size_t kk = ar.row_start[r]; kk < ar.row_start[r + 1]; ++kk)
      v(static_cast<Eigen::Index>(ar.col[kk]), static_cast<Eigen::Index>(r)) = ar.val[kk];
    for (std::size_t kk = ar.row_start[r]; kk < ar.row_start[r + 1]; ++kk) {
      const std::size_t b = kkt.pattern_->block_of[ar.col[kk]];
      const auto& cols = pat.blocks[b];
      // Skip blocks already handled for this row.
      bool seen = false;
      for (std::size_t q = ar.row_start[r]; q < kk && !seen; ++q) seen = kkt.pattern_->block_of[ar.col[q]] == b;
      if (seen) continue;
      local.resize(cols.size());
      for (std::size_t i = 0; i < cols.size(); ++i) local[i] = v(static_cast<Eigen::Index>(cols[i]), static_cast<Eigen::Index>(r));
      small_cholesky_solve(kkt.chol_.data() + kkt.block_offset_[b], cols.size(), local.data());
      for (std::size_t i = 0; i < cols.size(); ++i) v(static_cast<Eigen::Index>(cols[i]), static_cast<Eigen::Index>(r)) = local[i];
    }
  }
  Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(meq, meq);
  for (std::size_t r = 0; r < ar.rows; ++r)
    for (std::size_t k = ar.row_start[r]; k < ar.row_start[r + 1]; ++k)
      schur.row(static_cast<Eigen::Index>(r)) += ar.val[k] * v.row(static_cast<Eigen::Index>(ar.col[k]));
  schur = 0.5 * (schur + schur.transpose()).eval();
  schur.diagonal().array() += damping;
  kkt.schur_llt_.compute(schur);
  if (kkt.schur_llt_.info() != Eigen::Success) return std::nullopt;
  const auto& sfactor = kkt.schur_llt_.matrixLLT();
  if (!(sfactor.diagonal().minCoeff() > 1e-10 * sfactor.diagonal().maxCoeff())) return std::nullopt;
  return kkt;
}

void ReducedKkt::apply_h(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.resize(x.size());
  for (std::size_t b = 0; b < pattern_->blocks.size(); ++b) {
    const auto& cols = pattern_->blocks[b];
    const std::size_t k = cols.size();
    const double* block = h_.data() + block_offset_[b];
    for (std::size_t i = 0; i < k; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += block[i * k + j] * x[static_cast<Eigen::Index>(cols[j])];
      out[static_cast<Eigen::Index>(cols[i])] = acc;
    }
  }
}

void ReducedKkt::solve_h(Eigen::VectorXd& x) const {
  double local[16];
  std::vector<double> big;
  for (std::size_t b = 0; b < pattern_->blocks.size(); ++b) {
    const auto& cols = pattern_->blocks[b];
    const std::size_t k = cols.size();
    double* buf = local;
    if (k > 16) {
      big.resize(k);
      buf = big.data();
    }
    for (std::size_t i = 0; i < k; ++i) buf[i] = x[static_cast<Eigen::Index>(cols[i])];
    small_cholesky_solve(chol_.data() + block_offset_[b], k, buf);
    for (std::size_t i = 0; i < k; ++i) x[static_cast<Eigen::Index>(cols[i])] = buf[i];
  }
}

void ReducedKkt::solve_once(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry, Eigen::VectorXd& dx,
                            Eigen::VectorXd& dy) const {
  const SparseRows& a = pattern_->a_rows;
  Eigen::VectorXd u = rx;
  solve_h(u);
  Eigen::VectorXd au;
  a.multiply(u, au);
  dy = schur_llt_.solve(au - ry);
  Eigen::VectorXd aty;
  a.multiply_transpose(dy, aty);
  dx = rx - aty;
  solve_h(dx);
}

void ReducedKkt::solve(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry, Eigen::VectorXd& dx,
                       Eigen::VectorXd& dy) const {
  solve_once(rx, ry, dx, dy);
  // One step of iterative refinement against the unreduced system.
  const SparseRows& a = pattern_->a_rows;
  Eigen::VectorXd hdx, aty, adx;
  apply_h(dx, hdx);
  a.multiply_transpose(dy, aty);
  a.multiply(dx, adx);
  const Eigen::VectorXd res_x = rx - hdx - aty;
  const Eigen::VectorXd res_y = ry - adx + damping_ * dy;
  Eigen::VectorXd cx, cy;
  solve_once(res_x, res_y, cx, cy);
  dx += cx;
  dy += cy;
}

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

ReducedKkt factorize_or_damp(const StandardFormLP& lp, const std::shared_ptr<const KktPattern>& pattern,
                             const Eigen::VectorXd& w) {
  for (double damping : {0.0, 1e-10, 1e-8, 1e-6}) {
    if (auto kkt = ReducedKkt::factorize(lp, pattern, w, damping)) return std::move(*kkt);
  }
  fail(ErrorCode::Infeasible, "interior-point Newton system could not be factorized");
}

}  // namespace

QpSolution solve_qp(const StandardFormLP& lp, const QpSettings& settings) {
  return solve_qp(lp, std::make_shared<const KktPattern>(KktPattern::from(lp)), settings);
}

QpSolution solve_qp(const StandardFormLP& lp, const std::shared_ptr<const KktPattern>& pattern,
                    const QpSettings& settings) {
  const SparseRows& a_rows = pattern->a_rows;
  const SparseRows& g_rows = pattern->g_rows;
  const auto n = static_cast<Eigen::Index>(lp.variable_count);
  const auto m = static_cast<Eigen::Index>(g_rows.rows);
  const Eigen::VectorXd& c = lp.cost_vector;
  const Eigen::VectorXd& b = lp.equality_rhs;
  const Eigen::VectorXd& h = lp.inequality_rhs;
  const Eigen::VectorXd q = lp.quad_diag.size() == n ? lp.quad_diag : Eigen::VectorXd::Zero(n);

  const double b_scale = 1.0 + b.lpNorm<Eigen::Infinity>();
  const double h_scale = 1.0 + h.lpNorm<Eigen::Infinity>();
  const double c_scale = 1.0 + c.lpNorm<Eigen::Infinity>();

  QpSolution sol;
  Eigen::VectorXd gx, gtv, atv;

  // Starting point: least-squares fit of the inequalities with W = I, then
  // shift slacks and multipliers into the positive orthant.
  {
    const ReducedKkt kkt = factorize_or_damp(lp, pattern, Eigen::VectorXd::Ones(m));
    g_rows.multiply_transpose(h, gtv);
    kkt.solve(-c + gtv, b, sol.x, sol.y);
    g_rows.multiply(sol.x, gx);
    sol.s = h - gx;
    sol.z = gx - h;
    const double ap = -sol.s.minCoeff();
    if (ap >= 0.0) sol.s.array() += 1.0 + ap;
    const double ad = -sol.z.minCoeff();
    if (ad >= 0.0) sol.z.array() += 1.0 + ad;
  }

  Eigen::VectorXd r_d(n), r_p, r_g(m), w(m), dx, dy, dz(m), ds(m), r_sz(m), ax;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    g_rows.multiply(sol.x, gx);
    g_rows.multiply_transpose(sol.z, gtv);
    a_rows.multiply_transpose(sol.y, atv);
    a_rows.multiply(sol.x, ax);
    r_d = q.cwiseProduct(sol.x) + c + atv + gtv;
    r_p = ax - b;
    r_g = gx + sol.s - h;
    const double gap = sol.s.dot(sol.z);
    const double mu = gap / static_cast<double>(m);
    sol.objective = 0.5 * sol.x.dot(q.cwiseProduct(sol.x)) + c.dot(sol.x);
    sol.iterations = it;

    if (!std::isfinite(gap) || !sol.x.allFinite()) fail(ErrorCode::Infeasible, "interior-point iterates diverged");
    const double pres = std::max(r_p.lpNorm<Eigen::Infinity>() / b_scale, r_g.lpNorm<Eigen::Infinity>() / h_scale);
    const double dres = r_d.lpNorm<Eigen::Infinity>() / c_scale;
    if (pres <= settings.tolerance && dres <= settings.tolerance &&
        gap <= settings.tolerance * (1.0 + std::abs(sol.objective)))
      return sol;
    if (it == settings.max_iterations) break;
    if (sol.x.lpNorm<Eigen::Infinity>() > 1e12 || sol.z.lpNorm<Eigen::Infinity>() > 1e14)
      fail(ErrorCode::Infeasible, "interior-point iterates unbounded; problem likely infeasible");

    w = sol.z.cwiseQuotient(sol.s);
    const ReducedKkt kkt = factorize_or_damp(lp, pattern, w);

    // dz = W (G dx + r_g) - r_sz / s,  ds = -r_g - G dx
    const auto newton = [&](const Eigen::VectorXd& rsz) {
      const Eigen::VectorXd rsz_over_s = rsz.cwiseQuotient(sol.s);
      Eigen::VectorXd tmp;
      g_rows.multiply_transpose(w.cwiseProduct(r_g) - rsz_over_s, tmp);
      kkt.solve(-r_d - tmp, -r_p, dx, dy);
      Eigen::VectorXd gdx;
      g_rows.multiply(dx, gdx);
      dz = w.cwiseProduct(gdx + r_g) - rsz_over_s;
      ds = -r_g - gdx;
    };

    r_sz = sol.s.cwiseProduct(sol.z);
    newton(r_sz);
    const double alpha_aff = std::min(1.0, std::min(max_step(sol.s, ds), max_step(sol.z, dz)));
    const double mu_aff = (sol.s + alpha_aff * ds).dot(sol.z + alpha_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    r_sz = sol.s.cwiseProduct(sol.z) + ds.cwiseProduct(dz);
    r_sz.array() -= sigma * mu;
    newton(r_sz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(sol.s, ds), max_step(sol.z, dz)));

    sol.x += alpha * dx;
    sol.y += alpha * dy;
    sol.z += alpha * dz;
    sol.s += alpha * ds;
  }
  fail(ErrorCode::MaxIterations,
       "interior-point method did not converge in " + std::to_string(settings.max_iterations) + " iterations");
}

}  // namespace pvdfl
