#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "wittenlab/common.hpp"

namespace wittenlab {

/// Harmonic-oscillator model of the deformed Laplacian on q-forms near an
/// index-k critical point of R^n, deformation parameter t > 0.
struct OscillatorModel {
  int n = 1;
  int k = 0;
  int q = 0;
  double t = 1.0;

  void validate() const {
    if (n < 1) throw Error("OscillatorModel: n >= 1 required");
    if (k < 0 || k > n) throw Error("OscillatorModel: 0 <= k <= n required");
    if (q < 0 || q > n) throw Error("OscillatorModel: 0 <= q <= n required");
    if (!(t > 0)) throw Error("OscillatorModel: t > 0 required");
  }
};

/// Zeroth-order shift of the model on the component dx_I:
///   -n + 2k - 2q + 4 * #{ j : i_j >= k+1 }   (indices 1-based).
inline int epsilon_shift(int n, int k, int q, const std::vector<int>& I) {
  if (static_cast<int>(I.size()) != q) throw Error("epsilon_shift: |I| must equal q");
  int above = 0;
  int prev = 0;
  for (int i : I) {
    if (i <= prev || i > n) throw Error("epsilon_shift: I must be strictly increasing in 1..n");
    prev = i;
    if (i >= k + 1) ++above;
  }
  return -n + 2 * k - 2 * q + 4 * above;
}

struct OscillatorSpectrum {
  /// ascending distinct eigenvalues with multiplicities
  std::vector<std::pair<double, long long>> lines;
};

/// Lowest `count` distinct eigenvalues of the model, by combinatorial
/// enumeration: eigenvalues are 2t(s + (eps_I + n)/2) over s >= 0 and |I| = q,
/// all nonnegative even multiples of t.
inline OscillatorSpectrum oscillator_spectrum(const OscillatorModel& model, int count) {
  model.validate();
  if (count < 1) throw Error("oscillator_spectrum: count >= 1");

  const int n = model.n, k = model.k, q = model.q;
  // base level (eps_I + n)/2 = k - q + 2 * #{ i in I : i >= k+1 } per component
  std::map<int, long long> base_mult;
  for (std::uint32_t m : subsets_of_size(n, q)) {
    int above = 0;
    for (int i = 0; i < n; ++i)
      if ((m & (1u << i)) && i + 1 >= k + 1) ++above;
    base_mult[k - q + 2 * above] += 1;
  }

  OscillatorSpectrum out;
  // eigenvalue 2t*v; multiplicity sum over bases b <= v of C(v-b+n-1, n-1)
  for (int v = 0; static_cast<int>(out.lines.size()) < count; ++v) {
    long long mult = 0;
    for (const auto& [b, bm] : base_mult)
      if (v >= b) mult += bm * binom(v - b + n - 1, n - 1);
    if (mult > 0) out.lines.emplace_back(2.0 * model.t * v, mult);
  }
  return out;
}

inline long long oscillator_kernel_dimension(const OscillatorModel& model) {
  OscillatorSpectrum s = oscillator_spectrum(model, 1);
  return (s.lines[0].first == 0.0) ? s.lines[0].second : 0;
}

/// Normalized Gaussian ground state of the q = k model:
///   (t/pi)^{n/4} exp(-t |x|^2 / 2) dx_1 ^ ... ^ dx_q.
struct GroundStateForm {
  double normalization;     // (t/pi)^{n/4}
  double exponent_coeff;    // t/2, the coefficient of -|x|^2 in the exponent
  std::vector<int> component;  // 1..q

  double value_at(const Vec& x) const {
    return normalization * std::exp(-exponent_coeff * x.squaredNorm());
  }
};

inline GroundStateForm ground_state_form(const OscillatorModel& model) {
  model.validate();
  if (model.q != model.k) throw DegreeMismatch("ground state exists only for q = k");
  GroundStateForm g;
  g.normalization = std::pow(model.t / kPi, model.n / 4.0);
  g.exponent_coeff = model.t / 2.0;
  for (int i = 1; i <= model.q; ++i) g.component.push_back(i);
  return g;
}

}  // namespace wittenlab
