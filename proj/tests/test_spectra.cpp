#include <catch2/catch_amalgamated.hpp>

#include "test_common.hpp"
#include "wittenlab/spectra.hpp"

using namespace wittenlab;
using Catch::Approx;

namespace {

GridPtr circle255() { return Grid::make_uniform(SampleManifold::circle(), 255); }

ClosedOneForm alpha_cos() {
  return ClosedOneForm::exact(ScalarField::cos_sum(SampleManifold::circle()));
}
ClosedOneForm alpha_dw() { return ClosedOneForm::exact(ScalarField::circle_double_well(0.3)); }

/// Quadrature oracle for the expected tunneling decay rate: twice the
/// barrier integral int |h'| d theta from the shallower minimum up over the
/// lower adjacent barrier top (composite Gauss-Legendre on the ascent arc).
double agmon_oracle_quadrature(const ScalarField& h) {
  auto pts = find_critical_points(h);
  std::vector<const CriticalPoint*> minima, maxima;
  for (const auto& p : pts)
    (p.index == 0 ? minima : maxima).push_back(&p);
  REQUIRE(minima.size() == 2);
  REQUIRE(maxima.size() == 2);
  const CriticalPoint* shallow =
      minima[0]->value > minima[1]->value ? minima[0] : minima[1];
  const CriticalPoint* target = nullptr;
  for (const auto* mx : maxima)
    if (!target || mx->value < target->value) target = mx;
  const double L = h.manifold().periods[0];
  double a = shallow->coordinates[0], b = target->coordinates[0];
  if (b < a) b += L;
  if (b - a > L / 2) b -= L;
  // composite 8-point Gauss-Legendre over 64 panels of the ascent arc
  static const double gx[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                               0.9602898564975363};
  static const double gw[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                               0.1012285362903763};
  const int panels = 64;
  double total = 0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
    const double mid = (lo + hi) / 2, half = (hi - lo) / 2;
    for (int i = 0; i < 4; ++i)
      for (double s : {-gx[i], gx[i]}) {
        Vec x(1);
        x << mid + half * s;
        total += gw[i] * std::abs(half) * std::abs(h.gradient(x)[0]);
      }
  }
  return 2.0 * total;
}

}  // namespace

TEST_CASE("flat circle Laplacian: {0, 1, 1}") {
  auto g = circle255();
  WittenOperator op(g, 0, 0.0, alpha_cos());
  SpectrumResult s = eigensolve(op, 3);
  REQUIRE(s.eigenvalues[0] == Approx(0.0).margin(1e-10));
  REQUIRE(s.eigenvalues[1] == Approx(1.0).epsilon(1e-10));
  REQUIRE(s.eigenvalues[2] == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("non-exact deformation: closed-form spectrum k^2 + t^2 a^2") {
  auto g = circle255();
  ClosedOneForm a = ClosedOneForm::harmonic(g->manifold(), Vec::Constant(1, 1.0));
  WittenOperator op(g, 0, 3.0, a);
  SpectrumResult s = eigensolve(op, 2);
  REQUIRE(s.eigenvalues[0] == Approx(9.0).epsilon(1e-10));
  REQUIRE(s.eigenvalues[1] == Approx(10.0).epsilon(1e-10));
}

TEST_CASE("exact kernel witness is the ground state at every t") {
  auto g = circle255();
  ScalarField h = ScalarField::cos_sum(g->manifold());
  for (double t : {2.0, 7.0}) {
    WittenOperator op(g, 0, t, alpha_cos());
    SpectrumResult s = eigensolve(op, 1);
    REQUIRE(s.eigenvalues[0] < 1e-8 * s.opnorm);
    DiscreteForm kern(g, 0);
    kern.comps[0] = g->sample([&](const Vec& x) { return std::exp(-t * h.value(x)); });
    kern = (1.0 / l2_norm(kern)) * kern;
    REQUIRE(std::abs(inner_product(kern, s.eigenforms[0])) == Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("eigensolve contracts: residuals, orthonormality, determinism") {
  auto g = circle255();
  WittenOperator op(g, 0, 8.0, alpha_dw());
  SpectrumResult s = eigensolve(op, 4);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(s.residuals[i] <= 1e-8 * s.opnorm);
    for (int j = 0; j <= i; ++j)
      REQUIRE(inner_product(s.eigenforms[i], s.eigenforms[j]) ==
              Approx(i == j ? 1.0 : 0.0).margin(1e-10));
  }
  for (int i = 1; i < 4; ++i) REQUIRE(s.eigenvalues[i] >= s.eigenvalues[i - 1]);
  REQUIRE(s.eigenvalues[0] >= -1e-9 * s.opnorm);
  SpectrumResult s2 = eigensolve(op, 4);
  for (int i = 0; i < 4; ++i)
    REQUIRE(s2.eigenvalues[i] == Approx(s.eigenvalues[i]).margin(1e-9 * (1 + s.opnorm)));
}

TEST_CASE("iterative path matches the dense path on the same operator") {
  auto g = Grid::make_uniform(SampleManifold::circle(), 129);
  WittenOperator op(g, 0, 6.0, alpha_dw());
  EigensolveOptions dense_opts, iter_opts;
  dense_opts.dense_threshold = 4096;
  iter_opts.dense_threshold = 1;  // force the blocked iteration
  SpectrumResult sd = eigensolve(op, 4, dense_opts);
  SpectrumResult si = eigensolve(op, 4, iter_opts);
  for (int i = 0; i < 4; ++i)
    REQUIRE(si.eigenvalues[i] == Approx(sd.eigenvalues[i]).margin(1e-7 * (1 + sd.opnorm)));
}

TEST_CASE("small counts match the zero counts by index") {
  auto g = circle255();
  REQUIRE(small_count(g, 0, 8.0, alpha_cos()) == 1);
  REQUIRE(small_count(g, 1, 8.0, alpha_cos()) == 1);
  REQUIRE(small_count(g, 0, 8.0, alpha_dw()) == 2);
  REQUIRE(small_count(g, 1, 8.0, alpha_dw()) == 2);
}

TEST_CASE("2-torus small counts at t = 8: (1, 2, 1)") {
  auto g = Grid::make_uniform(SampleManifold::torus(), 97);
  ClosedOneForm a = ClosedOneForm::exact(ScalarField::cos_sum(g->manifold()));
  REQUIRE(small_count(g, 0, 8.0, a) == 1);
  REQUIRE(small_count(g, 1, 8.0, a) == 2);
  REQUIRE(small_count(g, 2, 8.0, a) == 1);
}

TEST_CASE("2-torus spectrum matches the separated tensor oracle") {
  // cos x + cos y separates; the 2d spectrum is the sum-set of 1d spectra.
  auto g1 = Grid::make_uniform(SampleManifold::circle(), 97);
  const double t = 6.0;
  Vec all1d = factorized_spectrum_1d(g1, t, alpha_cos());
  std::vector<double> sums;
  for (int i = 0; i < all1d.size(); ++i)
    for (int j = 0; j < all1d.size(); ++j) sums.push_back(all1d[i] + all1d[j]);
  std::sort(sums.begin(), sums.end());

  auto g2 = Grid::make_uniform(SampleManifold::torus(), 97);
  ClosedOneForm a2 = ClosedOneForm::exact(ScalarField::cos_sum(g2->manifold()));
  WittenOperator op(g2, 1, t, a2);
  SpectrumResult s = eigensolve(op, 4);
  // q=1 components are dx and dy; each contributes the same sum-set, so the
  // lowest distinct sums appear with doubled multiplicity
  REQUIRE(s.eigenvalues[0] == Approx(sums[0]).margin(1e-6 * s.opnorm));
  REQUIRE(s.eigenvalues[1] == Approx(sums[0]).margin(1e-6 * s.opnorm));
  REQUIRE(s.eigenvalues[2] == Approx(sums[1]).margin(2e-5 * s.opnorm));
}

TEST_CASE("Novikov case: no zeros, no small eigenvalues, closed-form bottom") {
  auto g = circle255();
  ClosedOneForm a = ClosedOneForm::harmonic(g->manifold(), Vec::Constant(1, 0.5));
  WittenOperator op(g, 0, 10.0, a);
  SpectrumResult s = eigensolve(op, 1);
  REQUIRE(std::abs(s.eigenvalues[0] - 25.0) < 1e-6);
  REQUIRE(small_count(g, 0, 10.0, a) == 0);
}

TEST_CASE("gap not open at tiny t") {
  auto g = circle255();
  REQUIRE_THROWS_AS(small_count(g, 0, 0.4, alpha_dw()), GapNotOpen);
}

TEST_CASE("gap sweep on the double well: exponential decay and linear growth") {
  auto g = circle255();
  ScalarField h = ScalarField::circle_double_well(0.3);
  GapReport rep = gap_sweep(g, 0, {4, 6, 8, 10, 12}, ClosedOneForm::exact(h));
  REQUIRE(rep.cluster_size == 2);
  REQUIRE(rep.decay_fit.valid);
  REQUIRE(rep.decay_fit.slope < 0);
  REQUIRE(rep.decay_fit.r_squared > 0.99);
  const double oracle = agmon_oracle_quadrature(h);
  REQUIRE(std::abs(-rep.decay_fit.slope - oracle) / oracle < 0.2);
  REQUIRE(rep.growth_fit.valid);
  REQUIRE(rep.growth_fit.slope > 0);
  REQUIRE(rep.growth_fit.r_squared > 0.95);
  for (size_t i = 1; i < rep.first_large.size(); ++i)
    REQUIRE(rep.first_large[i] > rep.first_large[i - 1]);
}

TEST_CASE("gap sweep with kernel only: no decay data, growth still fits") {
  auto g = circle255();
  GapReport rep = gap_sweep(g, 0, {4, 6, 8, 10}, alpha_cos());
  REQUIRE(rep.cluster_size == 1);
  REQUIRE_FALSE(rep.decay_fit.valid);  // only exact-kernel values below 1
  REQUIRE(rep.growth_fit.slope > 0);
}

TEST_CASE("small subspace: dimensions, chain property, t-stable kernel") {
  auto g = circle255();
  // cos theta: dimension 1, basis ~ e^{-th}
  ScalarField h = ScalarField::cos_sum(g->manifold());
  SmallSubspace s0 = small_subspace(g, 0, 10.0, alpha_cos());
  REQUIRE(s0.dimension() == 1);
  DiscreteForm kern(g, 0);
  kern.comps[0] = g->sample([&](const Vec& x) { return std::exp(-10.0 * h.value(x)); });
  kern = (1.0 / l2_norm(kern)) * kern;
  REQUIRE(std::abs(inner_product(kern, s0.basis[0])) == Approx(1.0).margin(1e-8));

  // double well: dimension 2 at both degrees; d(t) maps small into small
  const double t = 5.0;
  SmallSubspace a0 = small_subspace(g, 0, t, alpha_dw());
  SmallSubspace a1 = small_subspace(g, 1, t, alpha_dw());
  REQUIRE(a0.dimension() == 2);
  REQUIRE(a1.dimension() == 2);
  for (const auto& b : a0.basis) {
    DiscreteForm db = witten_d(b, t, alpha_dw());
    const double nrm = l2_norm(db);
    if (nrm < 1e-5) continue;  // kernel direction up to eigenvector noise
    DiscreteForm leak = db - a1.project(db);
    REQUIRE(l2_norm(leak) <= 1e-6 * nrm);
  }

  // kernel dimension of the deformed complex is t-independent for exact forms
  for (double tt : {3.0, 6.0, 9.0}) {
    Vec spec = factorized_spectrum_1d(g, tt, alpha_dw());
    const double floor = factorized_kernel_floor(g, tt, alpha_dw());
    int kernel = 0;
    for (int i = 0; i < spec.size(); ++i)
      if (spec[i] <= floor) ++kernel;
    REQUIRE(kernel == 1);
  }
}

TEST_CASE("cluster cardinality change is detected") {
  // alpha = 0.5 dtheta: spectrum k^2 + t^2/4, so one eigenvalue sits below 1
  // for t < 2 and none afterwards
  auto g = circle255();
  ClosedOneForm a = ClosedOneForm::harmonic(g->manifold(), Vec::Constant(1, 0.5));
  REQUIRE_THROWS_AS(gap_sweep(g, 0, {1.0, 2.5, 3.0, 4.0}, a), ClusterCardinalityChanged);
}
