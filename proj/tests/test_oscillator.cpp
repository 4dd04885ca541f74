#include <catch2/catch_amalgamated.hpp>

#include "wittenlab/oscillator.hpp"

using namespace wittenlab;
using Catch::Approx;

namespace {

/// Brute-force enumeration of -n + 2k - 2q + 4#{j : i_j >= k+1} over explicit
/// index lists, independent of the library implementation.
int epsilon_bruteforce(int n, int k, int q, const std::vector<int>& I) {
  int cnt = 0;
  for (int i : I)
    if (i >= k + 1) ++cnt;
  return -n + 2 * k - 2 * q + 4 * cnt;
}

/// Dense finite-difference spectrum of the 1d model -u'' + t^2 x^2 u + t e u
/// on [-8, 8]; the oracle for the closed-form enumeration.
std::vector<double> fd_1d_model(double t, int eps, int M, int want) {
  const double a = 8.0;
  Vec x(M);
  for (int i = 0; i < M; ++i) x[i] = -a + 2 * a * i / (M - 1);
  const double h = x[1] - x[0];
  Mat T = Mat::Zero(M, M);
  for (int i = 0; i < M; ++i) {
    T(i, i) = 2.0 / (h * h) + t * t * x[i] * x[i] + t * eps;
    if (i + 1 < M) {
      T(i, i + 1) = -1.0 / (h * h);
      T(i + 1, i) = -1.0 / (h * h);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  std::vector<double> out;
  for (int i = 0; i < want; ++i) out.push_back(es.eigenvalues()[i]);
  return out;
}

}  // namespace

TEST_CASE("epsilon shift: direct substitutions") {
  REQUIRE(epsilon_shift(1, 0, 0, {}) == -1);
  REQUIRE(epsilon_shift(2, 1, 1, {1}) == -2);
  REQUIRE(epsilon_shift(2, 1, 1, {2}) == 2);
  REQUIRE(epsilon_shift(2, 2, 2, {1, 2}) == -2);
}

TEST_CASE("epsilon shift agrees with brute-force enumeration; lower bound -n") {
  for (int n = 1; n <= 4; ++n)
    for (int k = 0; k <= n; ++k)
      for (int q = 0; q <= n; ++q)
        for (std::uint32_t m : subsets_of_size(n, q)) {
          std::vector<int> I;
          for (int i = 0; i < n; ++i)
            if (m & (1u << i)) I.push_back(i + 1);
          const int e = epsilon_shift(n, k, q, I);
          REQUIRE(e == epsilon_bruteforce(n, k, q, I));
          REQUIRE(e >= -n);
          if (e == -n) REQUIRE(q == k);
        }
}

TEST_CASE("oscillator spectrum: 1d ground truth against dense discretization") {
  OscillatorModel m{1, 0, 0, 1.0};
  OscillatorSpectrum s = oscillator_spectrum(m, 3);
  REQUIRE(s.lines.size() == 3);
  REQUIRE(s.lines[0] == std::pair{0.0, 1LL});
  REQUIRE(s.lines[1] == std::pair{2.0, 1LL});
  REQUIRE(s.lines[2] == std::pair{4.0, 1LL});
  auto fd = fd_1d_model(1.0, -1, 600, 3);
  REQUIRE(std::abs(fd[0] - 0.0) < 2e-3);
  REQUIRE(std::abs(fd[1] - 2.0) / 2.0 < 1e-3);
  REQUIRE(std::abs(fd[2] - 4.0) / 4.0 < 1e-3);
}

TEST_CASE("oscillator spectrum: k=1 model has no kernel") {
  OscillatorModel m{1, 1, 0, 1.0};
  OscillatorSpectrum s = oscillator_spectrum(m, 2);
  REQUIRE(s.lines[0] == std::pair{2.0, 1LL});
  REQUIRE(s.lines[1] == std::pair{4.0, 1LL});
  auto fd = fd_1d_model(1.0, 1, 600, 2);
  REQUIRE(std::abs(fd[0] - 2.0) / 2.0 < 1e-3);
}

TEST_CASE("kernel dimension is 1 iff q = k") {
  for (int n = 1; n <= 2; ++n)
    for (int k = 0; k <= n; ++k)
      for (int q = 0; q <= n; ++q) {
        OscillatorModel m{n, k, q, 3.0};
        REQUIRE(oscillator_kernel_dimension(m) == (q == k ? 1 : 0));
      }
  OscillatorModel m{2, 1, 1, 1.0};
  OscillatorSpectrum s = oscillator_spectrum(m, 1);
  REQUIRE(s.lines[0] == std::pair{0.0, 1LL});
}

TEST_CASE("every eigenvalue is a nonnegative even multiple of t") {
  for (int n = 1; n <= 3; ++n)
    for (int k = 0; k <= n; ++k)
      for (int q = 0; q <= n; ++q) {
        const double t = 1.7;
        OscillatorSpectrum s = oscillator_spectrum({n, k, q, t}, 6);
        double prev = -1;
        for (auto [lam, mult] : s.lines) {
          REQUIRE(lam >= 0);
          REQUIRE(mult >= 1);
          REQUIRE(lam > prev);
          prev = lam;
          const double ratio = lam / (2 * t);
          REQUIRE(std::abs(ratio - std::round(ratio)) < 1e-12);
        }
      }
}

TEST_CASE("2d model spectrum matches the tensor finite-difference oracle") {
  // The 2d model separates per axis; its FD spectrum is the sum-set of 1d
  // FD spectra of -u'' + t^2 x^2 plus the component shift.
  const double t = 1.0;
  const int n = 2, k = 1, q = 1;
  auto base = fd_1d_model(t, 0, 420, 12);  // -u'' + t^2 x^2, levels t(2m+1)
  std::vector<double> sums;
  for (std::uint32_t m : subsets_of_size(n, q)) {
    std::vector<int> I;
    for (int i = 0; i < n; ++i)
      if (m & (1u << i)) I.push_back(i + 1);
    const int eps = epsilon_shift(n, k, q, I);
    for (double a : base)
      for (double b : base) sums.push_back(a + b + t * eps);
  }
  std::sort(sums.begin(), sums.end());
  OscillatorSpectrum s = oscillator_spectrum({n, k, q, t}, 5);
  // compare the 5 lowest distinct levels with multiplicity
  size_t pos = 0;
  for (auto [lam, mult] : s.lines) {
    long long seen = 0;
    while (pos < sums.size() && sums[pos] < lam + t * 1e-2) {
      REQUIRE(std::abs(sums[pos] - lam) / std::max(lam, 2 * t) < 1e-3);
      ++seen;
      ++pos;
    }
    REQUIRE(seen == mult);
  }
}

TEST_CASE("ground state form: normalization and components") {
  GroundStateForm g0 = ground_state_form({1, 0, 0, 1.0});
  REQUIRE(g0.normalization == Approx(std::pow(1.0 / kPi, 0.25)));
  REQUIRE(g0.exponent_coeff == Approx(0.5));
  REQUIRE(g0.component.empty());

  GroundStateForm g1 = ground_state_form({2, 1, 1, 4.0});
  REQUIRE(g1.normalization == Approx(std::sqrt(4.0 / kPi)));
  REQUIRE(g1.exponent_coeff == Approx(2.0));
  REQUIRE(g1.component == std::vector<int>{1});

  REQUIRE_THROWS_AS(ground_state_form({2, 1, 0, 1.0}), DegreeMismatch);
}

TEST_CASE("ground state has unit L2 norm (quadrature over a large box)") {
  for (auto [n, t] : {std::pair{1, 1.0}, std::pair{2, 4.0}}) {
    GroundStateForm g = ground_state_form({n, n == 1 ? 0 : 1, n == 1 ? 0 : 1, t});
    const double a = 8.0;
    const int M = 801;
    const double h = 2 * a / (M - 1);
    double s = 0;
    if (n == 1) {
      for (int i = 0; i < M; ++i) {
        Vec x(1);
        x << -a + i * h;
        double v = g.value_at(x);
        s += v * v * h;
      }
    } else {
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
          Vec x(2);
          x << -a + i * h, -a + j * h;
          double v = g.value_at(x);
          s += v * v * h * h;
        }
    }
    REQUIRE(std::abs(s - 1.0) < 1e-8);
  }
}
