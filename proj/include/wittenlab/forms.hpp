#pragma once

#include <vector>

#include "wittenlab/grid.hpp"
#include "wittenlab/manifold.hpp"

namespace wittenlab {

/// Coefficient arrays of a vector field (or 1-form; the flat metric
/// identifies them) sampled at the grid nodes.
inline std::vector<Vec> sample_one_form(const GridPtr& g, const ClosedOneForm& alpha) {
  std::vector<Vec> a(g->dim());
  for (int i = 0; i < g->dim(); ++i) a[i] = Vec::Zero(g->total());
  for (long long p = 0; p < g->total(); ++p) {
    Vec v = alpha.value(g->node(p));
    for (int i = 0; i < g->dim(); ++i) a[i][p] = v[i];
  }
  return a;
}

/// Exterior differential by per-axis trigonometric differentiation:
/// (d w)_J = sum_{i in J} sign * d/dx_i w_{J \ i}.
inline DiscreteForm exterior_d(const DiscreteForm& w) {
  const int n = w.grid->dim();
  if (w.degree >= n) throw TopDegree("exterior_d: form already has top degree");
  DiscreteForm out(w.grid, w.degree + 1);
  for (int cJ = 0; cJ < out.n_components(); ++cJ) {
    const std::uint32_t J = out.masks[cJ];
    for (int i = 0; i < n; ++i) {
      if (!(J & (1u << i))) continue;
      const std::uint32_t Jmi = J & ~(1u << i);
      const int sgn = insertion_sign(Jmi, i);
      out.comps[cJ] += sgn * w.grid->axis_derivative(i, w[Jmi]);
    }
  }
  return out;
}

/// Pointwise wedge product.
inline DiscreteForm wedge(const DiscreteForm& a, const DiscreteForm& b) {
  if (a.grid != b.grid) throw ShapeMismatch("wedge: different grids");
  const int n = a.grid->dim();
  if (a.degree + b.degree > n) throw TopDegree("wedge: degree exceeds dimension");
  DiscreteForm out(a.grid, a.degree + b.degree);
  for (int ca = 0; ca < a.n_components(); ++ca)
    for (int cb = 0; cb < b.n_components(); ++cb) {
      const std::uint32_t I = a.masks[ca], J = b.masks[cb];
      if (I & J) continue;
      const int sgn = merge_sign(I, J);
      out[I | J] += sgn * a.comps[ca].cwiseProduct(b.comps[cb]);
    }
  return out;
}

/// Wedge with a 1-form given by coefficient arrays.
inline DiscreteForm wedge_one_form(const std::vector<Vec>& alpha, const DiscreteForm& w) {
  const int n = w.grid->dim();
  if (w.degree >= n) throw TopDegree("wedge_one_form: top degree");
  DiscreteForm out(w.grid, w.degree + 1);
  for (int c = 0; c < w.n_components(); ++c) {
    const std::uint32_t J = w.masks[c];
    for (int i = 0; i < n; ++i) {
      if (J & (1u << i)) continue;
      out[J | (1u << i)] += insertion_sign(J, i) * alpha[i].cwiseProduct(w.comps[c]);
    }
  }
  return out;
}

/// Hodge star on the flat torus: a signed permutation of components.
inline DiscreteForm hodge_star(const DiscreteForm& w) {
  const int n = w.grid->dim();
  DiscreteForm out(w.grid, n - w.degree);
  for (int c = 0; c < w.n_components(); ++c) {
    const std::uint32_t I = w.masks[c];
    const std::uint32_t comp = ~I & ((1u << n) - 1u);
    out[comp] += complement_sign(I, n) * w.comps[c];
  }
  return out;
}

/// Interior product with a vector field given by coefficient arrays.
inline DiscreteForm interior_product(const std::vector<Vec>& X, const DiscreteForm& w) {
  if (w.degree < 1) throw BottomDegree("interior_product: degree-0 form");
  DiscreteForm out(w.grid, w.degree - 1);
  const int n = w.grid->dim();
  for (int cJ = 0; cJ < out.n_components(); ++cJ) {
    const std::uint32_t J = out.masks[cJ];
    for (int i = 0; i < n; ++i) {
      if (J & (1u << i)) continue;
      out.comps[cJ] += insertion_sign(J, i) * X[i].cwiseProduct(w[J | (1u << i)]);
    }
  }
  return out;
}

/// Deformed differential d(t)w = dw + t a ^ w for a closed 1-form a.
inline DiscreteForm witten_d(const DiscreteForm& w, double t, const ClosedOneForm& alpha) {
  alpha.validate();
  DiscreteForm out = exterior_d(w);
  if (t != 0.0) {
    const auto a = sample_one_form(w.grid, alpha);
    DiscreteForm tw = wedge_one_form(a, w);
    for (int c = 0; c < out.n_components(); ++c) out.comps[c] += t * tw.comps[c];
  }
  return out;
}

/// Undeformed codifferential via the star-derivative-star composition, sign
/// (-1)^{n(p-1)+1} on degree-p input.
inline DiscreteForm codifferential_plain(const DiscreteForm& w) {
  const int n = w.grid->dim();
  if (w.degree < 1) throw BottomDegree("codifferential: degree-0 form");
  const int p = w.degree;
  DiscreteForm r = hodge_star(exterior_d(hodge_star(w)));
  const int sgn = ((n * (p - 1) + 1) % 2 == 0) ? 1 : -1;
  return sgn * r;
}

/// Deformed codifferential, the formal adjoint of d(t): the deformation term
/// is t times contraction with the metric dual of the 1-form.
inline DiscreteForm codifferential(const DiscreteForm& w, double t, const ClosedOneForm& alpha) {
  DiscreteForm out = codifferential_plain(w);
  if (t != 0.0) {
    alpha.validate();
    const auto a = sample_one_form(w.grid, alpha);
    DiscreteForm tc = interior_product(a, w);
    for (int c = 0; c < out.n_components(); ++c) out.comps[c] += t * tc.comps[c];
  }
  return out;
}

/// Lie derivative by the Cartan formula d(i_X w) + i_X(dw); missing edge
/// terms at the top/bottom degree are zero.
inline DiscreteForm lie_derivative(const std::vector<Vec>& X, const DiscreteForm& w) {
  const int n = w.grid->dim();
  DiscreteForm out(w.grid, w.degree);
  if (w.degree >= 1) {
    DiscreteForm d_iX = exterior_d(interior_product(X, w));
    for (int c = 0; c < out.n_components(); ++c) out.comps[c] += d_iX.comps[c];
  }
  if (w.degree < n) {
    DiscreteForm iX_d = interior_product(X, exterior_d(w));
    for (int c = 0; c < out.n_components(); ++c) out.comps[c] += iX_d.comps[c];
  }
  return out;
}

}  // namespace wittenlab
