#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "wittenlab/forms.hpp"

namespace wittenlab {

enum class AssemblyRoute { composition, direct };

/// Deformed Hodge Laplacian on degree-q forms over a periodic grid.
///
/// route composition:  delta(t) d(t) + d(t) delta(t), built from the calculus
///                     operators (adjoint pairs at the matrix level).
/// route direct:       flat componentwise Laplacian + t * (pointwise
///                     endomorphism from the coefficient Jacobian acting on
///                     form indices) + t^2 |alpha|^2.
///
/// The operator is exposed matrix-free; densify() materializes it for small
/// problems (dense eigensolves, coordinate-list dumps).
class WittenOperator {
 public:
  WittenOperator(GridPtr grid, int q, double t, ClosedOneForm alpha,
                 AssemblyRoute route = AssemblyRoute::composition)
      : grid_(std::move(grid)), q_(q), t_(t), alpha_(std::move(alpha)), route_(route) {
    alpha_.validate();
    if (q_ < 0 || q_ > grid_->dim()) throw Error("WittenOperator: bad degree");
    if (t_ < 0) throw Error("WittenOperator: t >= 0 required");
    masks_ = subsets_of_size(grid_->dim(), q_);
    if (route_ == AssemblyRoute::direct) precompute_direct();
    else alpha_samples_ = sample_one_form(grid_, alpha_);
  }

  const GridPtr& grid() const { return grid_; }
  int degree() const { return q_; }
  double t() const { return t_; }
  const ClosedOneForm& alpha() const { return alpha_; }
  AssemblyRoute route() const { return route_; }
  long long dim() const { return static_cast<long long>(masks_.size()) * grid_->total(); }

  DiscreteForm apply(const DiscreteForm& w) const {
    if (w.degree != q_ || w.grid != grid_) throw ShapeMismatch("WittenOperator::apply");
    return route_ == AssemblyRoute::composition ? apply_composition(w) : apply_direct(w);
  }

  Vec apply_stacked(const Vec& v) const {
    return apply(DiscreteForm::from_stacked(grid_, q_, v)).stacked();
  }

  /// Largest-eigenvalue estimate by seeded power iteration.
  double opnorm_estimate(int iters = 40, std::uint64_t seed = 42) const {
    auto rng = make_rng(seed);
    std::normal_distribution<double> dist;
    Vec v(dim());
    for (long long i = 0; i < dim(); ++i) v[i] = dist(rng);
    v.normalize();
    double lam = 0;
    for (int it = 0; it < iters; ++it) {
      Vec w = apply_stacked(v);
      lam = v.dot(w);
      double nw = w.norm();
      if (nw == 0) return 0;
      v = w / nw;
    }
    return std::abs(lam);
  }

  Mat densify() const {
    const long long d = dim();
    if (d > 6000) throw Error("WittenOperator::densify: operator too large");
    Mat M(d, d);
    Vec e = Vec::Zero(d);
    for (long long j = 0; j < d; ++j) {
      e[j] = 1;
      M.col(j) = apply_stacked(e);
      e[j] = 0;
    }
    return M;
  }

  /// Coordinate-list text dump (row col value per line) for debugging.
  void write_coo(const std::string& path, double drop_tol = 1e-14) const {
    Mat M = densify();
    const double scale = M.cwiseAbs().maxCoeff();
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open " + path);
    for (long long i = 0; i < M.rows(); ++i)
      for (long long j = 0; j < M.cols(); ++j)
        if (std::abs(M(i, j)) > drop_tol * scale)
          std::fprintf(f, "%lld %lld %.17g\n", i, j, M(i, j));
    std::fclose(f);
  }

 private:
  DiscreteForm apply_composition(const DiscreteForm& w) const {
    const int n = grid_->dim();
    DiscreteForm out(grid_, q_);
    if (q_ < n) {
      DiscreteForm dd = codifferential_with_samples(witten_d_with_samples(w));
      for (int c = 0; c < out.n_components(); ++c) out.comps[c] += dd.comps[c];
    }
    if (q_ > 0) {
      DiscreteForm dd = witten_d_with_samples(codifferential_with_samples(w));
      for (int c = 0; c < out.n_components(); ++c) out.comps[c] += dd.comps[c];
    }
    return out;
  }

  DiscreteForm witten_d_with_samples(const DiscreteForm& w) const {
    DiscreteForm out = exterior_d(w);
    if (t_ != 0.0) {
      DiscreteForm tw = wedge_one_form(alpha_samples_, w);
      for (int c = 0; c < out.n_components(); ++c) out.comps[c] += t_ * tw.comps[c];
    }
    return out;
  }

  DiscreteForm codifferential_with_samples(const DiscreteForm& w) const {
    DiscreteForm out = codifferential_plain(w);
    if (t_ != 0.0) {
      DiscreteForm tc = interior_product(alpha_samples_, w);
      for (int c = 0; c < out.n_components(); ++c) out.comps[c] += t_ * tc.comps[c];
    }
    return out;
  }

  DiscreteForm apply_direct(const DiscreteForm& w) const {
    const int n = grid_->dim();
    const int C = static_cast<int>(masks_.size());
    DiscreteForm out(grid_, q_);
    // flat Laplacian, componentwise (square of the derivative matrices, so
    // that the two assembly routes share one discretization of d^2)
    for (int c = 0; c < C; ++c) {
      for (int a = 0; a < n; ++a)
        out.comps[c] -= grid_->axis_second_derivative(a, w.comps[c]);
      out.comps[c] += t_ * t_ * alpha_norm2_.cwiseProduct(w.comps[c]);
    }
    // zeroth-order term: nodewise endomorphism on the component vector
    if (t_ != 0.0)
      for (int cr = 0; cr < C; ++cr)
        for (int cc = 0; cc < C; ++cc) {
          const Vec& coeff = endo_[cr * C + cc];
          if (coeff.size() == 0) continue;
          out.comps[cr] += t_ * coeff.cwiseProduct(w.comps[cc]);
        }
    return out;
  }

  void precompute_direct() {
    const int n = grid_->dim();
    const int C = static_cast<int>(masks_.size());
    const long long total = grid_->total();
    alpha_norm2_ = Vec::Zero(total);
    // structure constants of 2 dx_i ^ i_j - delta_ij on the component basis
    endo_.assign(static_cast<size_t>(C) * C, Vec());
    std::vector<std::vector<std::pair<int, double>>> structure(
        static_cast<size_t>(C) * C);  // (flattened (i,j), weight)
    for (int cc = 0; cc < C; ++cc) {
      const std::uint32_t J = masks_[cc];
      for (int j = 0; j < n; ++j) {
        if (!(J & (1u << j))) continue;
        const int s1 = insertion_sign(J & ~(1u << j), j);  // i_j d x_J
        for (int i = 0; i < n; ++i) {
          const std::uint32_t Jmj = J & ~(1u << j);
          if (Jmj & (1u << i)) continue;
          const std::uint32_t K = Jmj | (1u << i);
          const int s2 = insertion_sign(Jmj, i);
          int cr = -1;
          for (int c = 0; c < C; ++c)
            if (masks_[c] == K) { cr = c; break; }
          structure[static_cast<size_t>(cr) * C + cc].push_back({i * n + j, 2.0 * s1 * s2});
        }
      }
      // -trace part
      for (int i = 0; i < n; ++i)
        structure[static_cast<size_t>(cc) * C + cc].push_back({i * n + i, -1.0});
    }
    // evaluate H_ij at every node and contract with the structure constants
    std::vector<Vec> H(static_cast<size_t>(n) * n, Vec::Zero(total));
    for (long long p = 0; p < total; ++p) {
      const Vec x = grid_->node(p);
      const Vec av = alpha_.value(x);
      alpha_norm2_[p] = av.squaredNorm();
      const Mat Hx = alpha_.jacobian(x);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) H[static_cast<size_t>(i) * n + j][p] = Hx(i, j);
    }
    for (int cr = 0; cr < C; ++cr)
      for (int cc = 0; cc < C; ++cc) {
        const auto& terms = structure[static_cast<size_t>(cr) * C + cc];
        if (terms.empty()) continue;
        Vec acc = Vec::Zero(total);
        for (const auto& [ij, wgt] : terms) acc += wgt * H[ij];
        endo_[static_cast<size_t>(cr) * C + cc] = acc;
      }
  }

  GridPtr grid_;
  int q_;
  double t_;
  ClosedOneForm alpha_;
  AssemblyRoute route_;
  std::vector<std::uint32_t> masks_;
  std::vector<Vec> alpha_samples_;

  // direct route caches
  Vec alpha_norm2_;
  std::vector<Vec> endo_;
};

/// Dense matrix of the deformed differential d(t): degree q -> q+1
/// (for factorized small-spectrum computations on 1D grids).
inline Mat deformed_derivative_matrix(const GridPtr& g, int q, double t,
                                      const ClosedOneForm& alpha) {
  const int n = g->dim();
  if (q >= n) throw TopDegree("deformed_derivative_matrix");
  const long long din = binom(n, q) * g->total();
  const long long dout = binom(n, q + 1) * g->total();
  if (din > 4096) throw Error("deformed_derivative_matrix: too large to densify");
  Mat M(dout, din);
  Vec e = Vec::Zero(din);
  for (long long j = 0; j < din; ++j) {
    e[j] = 1;
    DiscreteForm w = DiscreteForm::from_stacked(g, q, e);
    M.col(j) = witten_d(w, t, alpha).stacked();
    e[j] = 0;
  }
  return M;
}

}  // namespace wittenlab
