#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wittenlab/common.hpp"

namespace wittenlab {

/// Flat torus R^n / (periods * Z^n) with the Euclidean metric in periodic
/// coordinates; n = 1 is the circle.
struct SampleManifold {
  int n = 1;
  std::vector<double> periods;

  SampleManifold() : periods{2 * kPi} {}
  SampleManifold(int dim, std::vector<double> per) : n(dim), periods(std::move(per)) {
    if (n < 1 || static_cast<int>(periods.size()) != n)
      throw Error("SampleManifold: need one period per axis, n >= 1");
    for (double L : periods)
      if (!(L > 0)) throw Error("SampleManifold: periods must be positive");
  }

  static SampleManifold circle(double period = 2 * kPi) { return SampleManifold(1, {period}); }
  static SampleManifold torus(double Lx = 2 * kPi, double Ly = 2 * kPi) {
    return SampleManifold(2, {Lx, Ly});
  }

  double min_period() const { return *std::min_element(periods.begin(), periods.end()); }
  double volume() const {
    double v = 1;
    for (double L : periods) v *= L;
    return v;
  }

  /// Canonical representative in [0, period) per axis.
  Vec canonical(const Vec& x) const {
    Vec y = x;
    for (int i = 0; i < n; ++i) {
      y[i] = std::fmod(y[i], periods[i]);
      if (y[i] < 0) y[i] += periods[i];
    }
    return y;
  }

  /// Minimal-image displacement a - b, components in [-L/2, L/2).
  Vec displacement(const Vec& a, const Vec& b) const {
    Vec d = a - b;
    for (int i = 0; i < n; ++i) {
      d[i] = std::fmod(d[i], periods[i]);
      if (d[i] < -periods[i] / 2) d[i] += periods[i];
      if (d[i] >= periods[i] / 2) d[i] -= periods[i];
    }
    return d;
  }

  double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }
};

/// One term A * prod_i cos(2*pi*k_i/L_i * x_i + phi_i) of a trigonometric
/// polynomial; k_i = 0 factors are constant 1.
struct TrigTerm {
  double amplitude = 0;
  std::vector<int> harmonics;   // integer wave numbers per axis
  std::vector<double> phases;   // per axis
};

/// Periodic scalar field from a fixed closed-form catalog; h, grad h and
/// Hess h are evaluated exactly.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(SampleManifold m, std::string name, std::vector<double> params,
              std::vector<TrigTerm> terms)
      : manifold_(std::move(m)), name_(std::move(name)), params_(std::move(params)),
        terms_(std::move(terms)) {
    for (const auto& t : terms_) {
      if (static_cast<int>(t.harmonics.size()) != manifold_.n ||
          static_cast<int>(t.phases.size()) != manifold_.n)
        throw Error("ScalarField: term arity does not match manifold dimension");
      if (!std::isfinite(t.amplitude)) throw Error("ScalarField: non-finite amplitude");
    }
  }

  const SampleManifold& manifold() const { return manifold_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<TrigTerm>& terms() const { return terms_; }

  double value(const Vec& x) const {
    double s = 0;
    for (const auto& t : terms_) {
      double p = t.amplitude;
      for (int i = 0; i < manifold_.n; ++i) p *= std::cos(omega(t, i) * x[i] + t.phases[i]);
      s += p;
    }
    return s;
  }

  Vec gradient(const Vec& x) const {
    Vec g = Vec::Zero(manifold_.n);
    for (const auto& t : terms_)
      for (int a = 0; a < manifold_.n; ++a) {
        double p = t.amplitude;
        for (int i = 0; i < manifold_.n; ++i) {
          double w = omega(t, i), arg = w * x[i] + t.phases[i];
          p *= (i == a) ? -w * std::sin(arg) : std::cos(arg);
        }
        g[a] += p;
      }
    return g;
  }

  Mat hessian(const Vec& x) const {
    int n = manifold_.n;
    Mat H = Mat::Zero(n, n);
    for (const auto& t : terms_)
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
          double p = t.amplitude;
          for (int i = 0; i < n; ++i) {
            double w = omega(t, i), arg = w * x[i] + t.phases[i];
            if (i == a && i == b)
              p *= -w * w * std::cos(arg);
            else if (i == a || i == b)
              p *= -w * std::sin(arg);
            else
              p *= std::cos(arg);
          }
          H(a, b) += p;
          if (b != a) H(b, a) += p;
        }
    return H;
  }

  // --- catalog ---

  /// h = sum_i cos(2*pi*x_i/L_i)
  static ScalarField cos_sum(const SampleManifold& m) {
    std::vector<TrigTerm> terms;
    for (int a = 0; a < m.n; ++a) {
      TrigTerm t;
      t.amplitude = 1;
      t.harmonics.assign(m.n, 0);
      t.phases.assign(m.n, 0.0);
      t.harmonics[a] = 1;
      terms.push_back(t);
    }
    return ScalarField(m, "cos-sum", {}, terms);
  }

  /// h = cos(2 theta) + c sin(theta) on the circle.
  static ScalarField circle_double_well(double c = 0.3, double period = 2 * kPi) {
    SampleManifold m = SampleManifold::circle(period);
    TrigTerm t1{1.0, {2}, {0.0}};
    TrigTerm t2{c, {1}, {-kPi / 2}};
    return ScalarField(m, "circle-double-well", {c}, {t1, t2});
  }

  /// h = cos x + cos y + c cos x cos y on the 2-torus.
  static ScalarField torus_tilted(double c, const SampleManifold& m) {
    if (m.n != 2) throw Error("torus-tilted: needs a 2-torus");
    TrigTerm tx{1.0, {1, 0}, {0.0, 0.0}};
    TrigTerm ty{1.0, {0, 1}, {0.0, 0.0}};
    TrigTerm txy{c, {1, 1}, {0.0, 0.0}};
    return ScalarField(m, "torus-tilted", {c}, {tx, ty, txy});
  }

  /// Catalog lookup by name; "trig" takes a user term list.
  static ScalarField from_catalog(const SampleManifold& m, const std::string& name,
                                  const std::vector<double>& params,
                                  const std::vector<TrigTerm>& user_terms = {}) {
    if (name == "cos-sum") return cos_sum(m);
    if (name == "circle-double-well") {
      if (m.n != 1) throw Error("circle-double-well: needs the circle");
      return circle_double_well(params.empty() ? 0.3 : params[0], m.periods[0]);
    }
    if (name == "torus-tilted") return torus_tilted(params.empty() ? 0.25 : params[0], m);
    if (name == "trig") return ScalarField(m, "trig", params, user_terms);
    throw Error("unknown field catalog entry: " + name);
  }

 private:
  double omega(const TrigTerm& t, int axis) const {
    return 2 * kPi * t.harmonics[axis] / manifold_.periods[axis];
  }

  SampleManifold manifold_;
  std::string name_;
  std::vector<double> params_;
  std::vector<TrigTerm> terms_;
};

/// Closed 1-form alpha = dh + (constant harmonic part). Closed by construction.
struct ClosedOneForm {
  SampleManifold manifold;
  std::optional<ScalarField> exact_part;
  Vec harmonic_part;  // constant coefficients per axis

  static ClosedOneForm exact(const ScalarField& h) {
    ClosedOneForm a;
    a.manifold = h.manifold();
    a.exact_part = h;
    a.harmonic_part = Vec::Zero(h.manifold().n);
    return a;
  }

  static ClosedOneForm harmonic(const SampleManifold& m, const Vec& c) {
    ClosedOneForm a;
    a.manifold = m;
    a.harmonic_part = c;
    return a;
  }

  static ClosedOneForm sum(const ScalarField& h, const Vec& c) {
    ClosedOneForm a = exact(h);
    a.harmonic_part = c;
    return a;
  }

  Vec value(const Vec& x) const {
    Vec v = harmonic_part;
    if (exact_part) v += exact_part->gradient(x);
    return v;
  }

  /// Jacobian of the coefficient vector field; symmetric since the form is closed.
  Mat jacobian(const Vec& x) const {
    if (exact_part) return exact_part->hessian(x);
    return Mat::Zero(manifold.n, manifold.n);
  }

  bool is_exact() const { return exact_part.has_value() && harmonic_part.norm() == 0; }

  void validate() const {
    if (!harmonic_part.allFinite()) throw NonClosedForm("harmonic coefficients not finite");
    if (static_cast<int>(harmonic_part.size()) != manifold.n)
      throw NonClosedForm("harmonic coefficient arity mismatch");
  }
};

/// Nondegenerate zero of grad h (or of a closed 1-form), classified by the
/// Hessian signature.
struct CriticalPoint {
  Vec coordinates;            // canonical representative
  double value = 0;           // h at the point (exact part only)
  int index = 0;              // number of negative Hessian eigenvalues
  Vec hess_eigenvalues;       // ascending
  Mat hess_eigenvectors;      // columns, matching hess_eigenvalues
};

struct CriticalPointOptions {
  int scan_resolution = 32;
  double grad_tol = 1e-10;
  double degeneracy_tol = 1e-6;
  int max_newton_iters = 60;
  /// merge tolerance defaults to 1e-6 * min period
  std::optional<double> merge_tol;
};

namespace detail {

inline std::optional<Vec> newton_polish(const ClosedOneForm& alpha, Vec x,
                                        const CriticalPointOptions& opt) {
  for (int it = 0; it < opt.max_newton_iters; ++it) {
    Vec g = alpha.value(x);
    if (g.norm() < opt.grad_tol) return alpha.manifold.canonical(x);
    Mat H = alpha.jacobian(x);
    Eigen::FullPivLU<Mat> lu(H);
    if (!lu.isInvertible()) return std::nullopt;
    Vec step = lu.solve(g);
    if (step.norm() > alpha.manifold.min_period())  // diverging
      return std::nullopt;
    x -= step;
  }
  return std::nullopt;
}

}  // namespace detail

/// Grid scan + Newton polish for the zero set of a closed 1-form, each zero
/// classified by the Hessian signature.
inline std::vector<CriticalPoint> find_zeros(const ClosedOneForm& alpha,
                                             const CriticalPointOptions& opt = {}) {
  alpha.validate();
  const SampleManifold& m = alpha.manifold;
  if (opt.scan_resolution < 16) throw Error("find_zeros: scan_resolution must be >= 16");
  const double merge_tol = opt.merge_tol.value_or(1e-6 * m.min_period());

  std::vector<Vec> seeds;
  std::vector<int> idx(m.n, 0);
  const int R = opt.scan_resolution;
  long long total = 1;
  for (int i = 0; i < m.n; ++i) total *= R;
  for (long long s = 0; s < total; ++s) {
    long long rem = s;
    Vec x(m.n);
    for (int i = 0; i < m.n; ++i) {
      x[i] = (rem % R) * m.periods[i] / R;
      rem /= R;
    }
    seeds.push_back(x);
  }

  std::vector<Vec> found;
  for (const Vec& s : seeds) {
    auto polished = detail::newton_polish(alpha, s, opt);
    if (!polished) continue;
    bool dup = false;
    for (const Vec& f : found)
      if (m.distance(f, *polished) < merge_tol) {
        // Same point numerically; distinct field values signal a merge of
        // genuinely different zeros, i.e. the scan cannot separate them.
        if (alpha.exact_part) {
          double dv = std::abs(alpha.exact_part->value(f) - alpha.exact_part->value(*polished));
          if (dv > 1e-8 * (1 + std::abs(alpha.exact_part->value(f))))
            throw ScanTooCoarse("distinct zeros closer than merge_tol");
        }
        dup = true;
        break;
      }
    if (!dup) found.push_back(*polished);
  }

  // deterministic order: sort by coordinates, folding representatives within
  // merge_tol of the upper wrap onto 0 for the comparison only
  auto sort_key = [&](const Vec& a, int i) {
    return (m.periods[i] - a[i] < merge_tol) ? 0.0 : a[i];
  };
  std::sort(found.begin(), found.end(), [&](const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
      const double ka = sort_key(a, i), kb = sort_key(b, i);
      if (ka < kb - 1e-12) return true;
      if (ka > kb + 1e-12) return false;
    }
    return false;
  });

  std::vector<CriticalPoint> out;
  for (const Vec& x : found) {
    CriticalPoint cp;
    cp.coordinates = x;
    cp.value = alpha.exact_part ? alpha.exact_part->value(x) : 0.0;
    Mat H = alpha.jacobian(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    cp.hess_eigenvalues = es.eigenvalues();
    cp.hess_eigenvectors = es.eigenvectors();
    double min_abs = cp.hess_eigenvalues.cwiseAbs().minCoeff();
    if (min_abs <= opt.degeneracy_tol) {
      std::ostringstream os;
      os << "degenerate critical point, |hess eig| = " << min_abs;
      throw DegenerateCritical(os.str());
    }
    cp.index = static_cast<int>((cp.hess_eigenvalues.array() < 0).count());
    out.push_back(cp);
  }
  return out;
}

inline std::vector<CriticalPoint> find_critical_points(const ScalarField& field,
                                                       const CriticalPointOptions& opt = {}) {
  return find_zeros(ClosedOneForm::exact(field), opt);
}

/// m_q = number of points of index q, q = 0..n.
inline std::vector<int> count_by_index(const std::vector<CriticalPoint>& points, int n) {
  std::vector<int> m(n + 1, 0);
  for (const auto& p : points) m.at(p.index)++;
  return m;
}

}  // namespace wittenlab
