#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "wittenlab/manifold.hpp"

namespace wittenlab {

struct FlowOptions {
  double ode_rel_tol = 1e-10;
  double ode_abs_tol = 1e-13;
  double max_time = 1e3;
  /// capture radius defaults to 1e-4 * min(periods)
  std::optional<double> capture_radius;
  /// seed offset for unstable-manifold shots, default 1e-3 * min(periods)
  std::optional<double> seed_offset;
  int scan_resolution = 360;     // angular scan for 2-cells
  double angle_tol = 1e-10;      // bisection floor, radians

  double capture(const SampleManifold& m) const {
    return capture_radius.value_or(1e-4 * m.min_period());
  }
  double seed(const SampleManifold& m) const {
    return seed_offset.value_or(1e-3 * m.min_period());
  }
};

enum class FlowDirection { forward, backward };  // forward follows -grad h

struct Trajectory {
  Vec start;
  std::vector<Vec> points;   // unwrapped coordinates, one per accepted step
  std::vector<double> times;
  int limit_index = -1;      // which critical point captured the flow
  std::vector<long long> limit_shift;  // period multiples between the unwrapped
                                       // endpoint and the canonical representative
  double arrival_distance = 0;
};

struct ConnectingOrbit {
  int upper = -1;  // critical point ids
  int lower = -1;
  int sign = 0;
  Trajectory path;
};

/// Ordered orthonormal bases of the unstable (negative Hessian) eigenspaces.
struct OrientationChoice {
  std::vector<Mat> frames;  // per critical point, n x index(x)

  static OrientationChoice standard(const std::vector<CriticalPoint>& pts) {
    OrientationChoice o;
    for (const auto& p : pts) {
      Mat f = p.hess_eigenvectors.leftCols(p.index);  // ascending eigenvalues
      for (int c = 0; c < f.cols(); ++c) {
        for (int r = 0; r < f.rows(); ++r)
          if (std::abs(f(r, c)) > 1e-10) {
            if (f(r, c) < 0) f.col(c) = -f.col(c);
            break;
          }
      }
      o.frames.push_back(f);
    }
    return o;
  }
};

namespace detail {

/// Embedded Dormand-Prince 5(4) step; returns the 5th-order update and an
/// error estimate.
template <typename F>
void rkdp_step(const F& f, const Vec& y, double h, Vec& y5, Vec& err) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                      e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
  Vec k1 = f(y);
  Vec k2 = f(y + h * a21 * k1);
  Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
  Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  Vec k7 = f(y5);
  Vec y4 = y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  err = y5 - y4;
}

/// Adaptive integration of y' = f(y) with a per-step callback; the callback
/// returns false to stop.
template <typename F, typename CB>
void integrate_adaptive(const F& f, Vec& y, double t_end, double rel_tol, double abs_tol,
                        const CB& on_step) {
  if (!(t_end > 0)) return;
  double t = 0, h = 0.05 * t_end;
  while (t_end - t > 1e-12 * t_end) {
    h = std::min(h, t_end - t);
    Vec y5, err;
    rkdp_step(f, y, h, y5, err);
    double scale = 0;
    for (int i = 0; i < y.size(); ++i) {
      const double s = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      scale = std::max(scale, std::abs(err[i]) / s);
    }
    if (!y5.allFinite() || !std::isfinite(scale))
      scale = std::numeric_limits<double>::infinity();
    if (scale <= 1.0) {
      t += h;
      y = y5;
      if (!on_step(t, y)) return;
    }
    const double factor =
        std::isfinite(scale) ? ((scale > 0) ? 0.9 * std::pow(scale, -0.2) : 5.0) : 0.2;
    h *= std::clamp(factor, 0.2, 5.0);
    if (h < 1e-15 * std::max(1.0, t_end)) throw Error("flow integration step collapsed");
  }
}

struct CaptureKey {
  int point = -1;
  std::vector<long long> shift;
  bool operator==(const CaptureKey& o) const { return point == o.point && shift == o.shift; }
  bool operator<(const CaptureKey& o) const {
    return std::tie(point, shift) < std::tie(o.point, o.shift);
  }
};

struct ShotResult {
  Trajectory traj;
  CaptureKey key;
  Mat frame;       // transported frame at capture (empty if not requested)
  int frame_sign = 1;
  bool captured = false;
};

/// Integrate the gradient flow (optionally with the variational frame) from
/// `start` until capture near a critical point other than `exclude`.
inline ShotResult flow_shot(const ScalarField& field, const std::vector<CriticalPoint>& pts,
                            const Vec& start, FlowDirection dir, const FlowOptions& opt,
                            const Mat& frame0 = Mat(), int exclude = -1) {
  const SampleManifold& m = field.manifold();
  const int n = m.n;
  const int fcols = static_cast<int>(frame0.cols());
  const double sgn = (dir == FlowDirection::forward) ? -1.0 : 1.0;
  const double capture = opt.capture(m);

  auto rhs = [&](const Vec& y) {
    Vec out(y.size());
    const Vec x = y.head(n);
    out.head(n) = sgn * field.gradient(x);
    if (fcols > 0) {
      const Mat H = field.hessian(x);
      Eigen::Map<const Mat> F(y.data() + n, n, fcols);
      Eigen::Map<Mat> dF(out.data() + n, n, fcols);
      dF = sgn * (H * F);
    }
    return out;
  };

  Vec y(n + n * fcols);
  y.head(n) = start;
  if (fcols > 0) Eigen::Map<Mat>(y.data() + n, n, fcols) = frame0;

  ShotResult res;
  res.traj.start = start;
  res.traj.points.push_back(start);
  res.traj.times.push_back(0.0);
  res.frame_sign = 1;

  bool left_exclusion = (exclude < 0);
  auto step_cb = [&](double t, Vec& state) {
    Vec x = state.head(n);
    res.traj.points.push_back(x);
    res.traj.times.push_back(t);
    if (fcols > 0) {
      // keep the transported frame well conditioned; QR with a positive
      // diagonal preserves its orientation class
      Eigen::Map<Mat> F(state.data() + n, n, fcols);
      double nrm = F.norm();
      if (nrm > 1e6 || nrm < 1e-6) {
        Eigen::HouseholderQR<Mat> qr(F);
        Mat Q = qr.householderQ() * Mat::Identity(n, fcols);
        Mat R = qr.matrixQR().topRows(fcols).triangularView<Eigen::Upper>();
        for (int c = 0; c < fcols; ++c)
          if (R(c, c) < 0) {
            Q.col(c) = -Q.col(c);
            res.frame_sign = -res.frame_sign;
          }
        F = Q;
      }
    }
    if (exclude >= 0 && !left_exclusion) {
      const double excl = std::max(3 * opt.seed(m), 2 * capture);
      if (m.distance(x, pts[exclude].coordinates) > excl) left_exclusion = true;
    }
    for (int p = 0; p < static_cast<int>(pts.size()); ++p) {
      if (p == exclude && !left_exclusion) continue;
      const double d = m.distance(x, pts[p].coordinates);
      if (d < capture) {
        res.captured = true;
        res.traj.limit_index = p;
        res.traj.arrival_distance = d;
        res.key.point = p;
        res.key.shift.resize(n);
        for (int i = 0; i < n; ++i)
          res.key.shift[i] =
              std::llround((x[i] - pts[p].coordinates[i]) / m.periods[i]);
        if (fcols > 0) res.frame = Eigen::Map<Mat>(state.data() + n, n, fcols);
        return false;
      }
    }
    return true;
  };

  integrate_adaptive(rhs, y, opt.max_time, opt.ode_rel_tol, opt.ode_abs_tol, step_cb);
  return res;
}

/// Orientation comparison at the lower point: coordinates of the transported
/// upper frame in the basis (flow direction, unstable frame of y).
inline int orbit_sign(const ScalarField& field, const CriticalPoint& y, const Mat& oy_frame,
                      const ShotResult& shot) {
  const Vec end = shot.traj.points.back();
  Vec v = -field.gradient(end);
  const double vn = v.norm();
  if (vn == 0) throw NonTransversal("flow direction vanished at capture");
  v /= vn;
  const int k = static_cast<int>(shot.frame.cols());
  Mat B(v.size(), k);
  B.col(0) = v;
  for (int c = 0; c + 1 < k; ++c) B.col(c + 1) = oy_frame.col(c);
  Mat M = (B.transpose() * B).ldlt().solve(B.transpose() * shot.frame);
  const double det = M.determinant();
  if (det == 0) throw NonTransversal("degenerate orientation comparison");
  return shot.frame_sign * ((det > 0) ? 1 : -1);
}

}  // namespace detail

/// Flow a point to its forward (or backward) limit.
inline Trajectory shoot(const ScalarField& field, const std::vector<CriticalPoint>& pts,
                        const Vec& start, FlowDirection dir, const FlowOptions& opt = {}) {
  detail::ShotResult res = detail::flow_shot(field, pts, start, dir, opt);
  if (!res.captured) {
    std::ostringstream os;
    os << "no capture within max_time = " << opt.max_time;
    throw NoCapture(os.str());
  }
  return res.traj;
}

/// Complete signed list of flow lines from `xi` (index k) to `yi` (index
/// k-1), on manifolds of dimension at most 2.
inline std::vector<ConnectingOrbit> connecting_orbits(const ScalarField& field,
                                                      const std::vector<CriticalPoint>& pts,
                                                      int xi, int yi,
                                                      const OrientationChoice& orient,
                                                      const FlowOptions& opt = {}) {
  const SampleManifold& m = field.manifold();
  if (m.n > 2) throw Error("connecting_orbits: implemented for dimension <= 2");
  const CriticalPoint& x = pts[xi];
  const CriticalPoint& y = pts[yi];
  if (x.index != y.index + 1) throw Error("connecting_orbits: indices must be adjacent");
  const int k = x.index;
  const double r0 = opt.seed(m);
  std::vector<ConnectingOrbit> orbits;

  auto record = [&](const detail::ShotResult& shot) {
    if (shot.traj.limit_index != yi) return;
    ConnectingOrbit orb;
    orb.upper = xi;
    orb.lower = yi;
    orb.sign = detail::orbit_sign(field, y, orient.frames[yi], shot);
    orb.path = shot.traj;
    orbits.push_back(orb);
  };

  if (k == 1) {
    const Vec u = orient.frames[xi].col(0);
    for (double s : {1.0, -1.0}) {
      Vec seed = x.coordinates + s * r0 * u;
      detail::ShotResult shot =
          detail::flow_shot(field, pts, seed, FlowDirection::forward, opt, u, xi);
      if (!shot.captured) throw NoCapture("unstable ray did not reach a rest point");
      record(shot);
    }
    return orbits;
  }

  // k == 2 on a surface: scan the circle of unstable directions; flow lines
  // bound for saddles sit at angles where the capture key jumps
  const Mat U = orient.frames[xi];
  auto seed_at = [&](double phi) -> Vec {
    return x.coordinates + r0 * (std::cos(phi) * U.col(0) + std::sin(phi) * U.col(1));
  };
  auto classify = [&](double phi) {
    return detail::flow_shot(field, pts, seed_at(phi), FlowDirection::forward, opt, Mat(), xi);
  };

  const int M = opt.scan_resolution;
  std::vector<double> phis(M);
  std::vector<detail::CaptureKey> keys(M);
  for (int j = 0; j < M; ++j) {
    phis[j] = 2 * kPi * (j + 0.5) / M + 0.0123456;
    detail::ShotResult s = classify(phis[j]);
    if (!s.captured) throw NoCapture("scan ray did not reach a rest point");
    if (pts[s.traj.limit_index].index == 1)
      throw NonTransversal("scan ray captured at a saddle; refine scan_resolution");
    keys[j] = s.key;
  }

  std::vector<double> found_angles;
  struct Interval {
    double a, b;
    detail::CaptureKey ka, kb;
  };
  std::deque<Interval> work;
  for (int j = 0; j < M; ++j) {
    const int jn = (j + 1) % M;
    if (keys[j] == keys[jn]) continue;
    work.push_back({phis[j], phis[jn] + (jn == 0 ? 2 * kPi : 0.0), keys[j], keys[jn]});
  }
  while (!work.empty()) {
    Interval iv = work.front();
    work.pop_front();
    std::optional<double> sep;
    while (iv.b - iv.a > opt.angle_tol) {
      const double mid = (iv.a + iv.b) / 2;
      detail::ShotResult s = classify(mid);
      if (!s.captured) throw NoCapture("bisection ray did not reach a rest point");
      if (pts[s.traj.limit_index].index == 1) {
        sep = mid;
        break;
      }
      if (s.key == iv.ka) {
        iv.a = mid;
      } else if (s.key == iv.kb) {
        iv.b = mid;
      } else {  // a third basin: a separatrix hides in each half
        work.push_back({mid, iv.b, s.key, iv.kb});
        iv.b = mid;
        iv.kb = s.key;
      }
    }
    if (!sep) {
      // interval is below angle_tol and still splits two minima; both ends
      // by construction reach minima, so the separatrix escaped the capture
      // ball: transversality of the discretized flow is in doubt
      throw NonTransversal("separatrix not isolated above angle_tol");
    }
    bool dup = false;
    for (double f : found_angles)
      if (std::abs(std::remainder(f - *sep, 2 * kPi)) < 1e-6) dup = true;
    if (!dup) found_angles.push_back(*sep);
  }

  for (double phi : found_angles) {
    // transported orientation frame for the sign; seed the full 2-frame
    detail::ShotResult shot =
        detail::flow_shot(field, pts, seed_at(phi), FlowDirection::forward, opt, U, xi);
    if (!shot.captured || pts[shot.traj.limit_index].index != 1) continue;
    record(shot);
  }
  return orbits;
}

/// Cochain complex data: generators by degree and integer incidence
/// matrices; I_q has one row per index-q generator and one column per
/// index-(q-1) generator.
struct MorseComplex {
  int n = 0;
  std::vector<std::vector<int>> generators;  // per degree, indices into the point list
  std::vector<Eigen::MatrixXi> incidence;    // incidence[q] is I_q, q = 1..n
  std::vector<CriticalPoint> points;
  OrientationChoice orientation;
};

inline MorseComplex build_morse_complex(const ScalarField& field,
                                        const std::vector<CriticalPoint>& pts,
                                        const OrientationChoice& orient,
                                        const FlowOptions& opt = {}) {
  const int n = field.manifold().n;
  MorseComplex cx;
  cx.n = n;
  cx.points = pts;
  cx.orientation = orient;
  cx.generators.assign(n + 1, {});
  for (int p = 0; p < static_cast<int>(pts.size()); ++p)
    cx.generators[pts[p].index].push_back(p);

  cx.incidence.assign(n + 1, Eigen::MatrixXi());
  for (int q = 1; q <= n; ++q) {
    const auto& upper = cx.generators[q];
    const auto& lower = cx.generators[q - 1];
    Eigen::MatrixXi I = Eigen::MatrixXi::Zero(upper.size(), lower.size());
    for (size_t r = 0; r < upper.size(); ++r)
      for (size_t c = 0; c < lower.size(); ++c) {
        auto orbits = connecting_orbits(field, pts, upper[r], lower[c], orient, opt);
        int sum = 0;
        for (const auto& orb : orbits) sum += orb.sign;
        I(r, c) = sum;
      }
    cx.incidence[q] = I;
  }

  // boundary-of-boundary must vanish as integer matrices
  for (int q = 1; q + 1 <= n; ++q) {
    if (cx.incidence[q + 1].size() == 0 || cx.incidence[q].size() == 0) continue;
    Eigen::MatrixXi prod = cx.incidence[q + 1] * cx.incidence[q];
    if (prod.cwiseAbs().maxCoeff() != 0)
      throw Error("incidence matrices do not compose to zero");
  }
  return cx;
}

namespace detail {

/// Exact integer rank by fraction-free (Bareiss) elimination.
inline int bareiss_rank(Eigen::MatrixXi M0) {
  using Wide = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
  Wide M = M0.cast<long long>();
  const int rows = static_cast<int>(M.rows()), cols = static_cast<int>(M.cols());
  int rank = 0;
  long long prev = 1;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r)
      if (M(r, col) != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    M.row(pivot).swap(M.row(rank));
    for (int r = rank + 1; r < rows; ++r) {
      for (int c = col + 1; c < cols; ++c)
        M(r, c) = (M(rank, col) * M(r, c) - M(r, col) * M(rank, c)) / prev;
      M(r, col) = 0;
    }
    prev = M(rank, col);
    ++rank;
  }
  return rank;
}

}  // namespace detail

/// Betti numbers of the cochain complex, by exact integer ranks.
inline std::vector<int> cohomology(const MorseComplex& cx) {
  std::vector<int> betti(cx.n + 1, 0);
  std::vector<int> ranks(cx.n + 2, 0);  // ranks[q] = rank I_q
  for (int q = 1; q <= cx.n; ++q)
    ranks[q] = (cx.incidence[q].size() > 0) ? detail::bareiss_rank(cx.incidence[q]) : 0;
  for (int q = 0; q <= cx.n; ++q) {
    const int dim = static_cast<int>(cx.generators[q].size());
    // ker of the differential leaving degree q minus the image entering it
    betti[q] = dim - ranks[q + 1] - ranks[q];
  }
  return betti;
}

/// Alternating-sum inequalities between zero counts and Betti numbers.
struct MorseInequalityReport {
  std::vector<long long> lhs;   // per N: (-1)^N sum_{i<=N} (-1)^i m_i
  std::vector<long long> rhs;   // same with Betti numbers
  std::vector<bool> holds;      // lhs >= rhs
  bool euler_equality = false;  // equality at N = n
  bool strong = false;          // m_q >= beta_q for all q
  bool all_hold() const {
    for (bool b : holds)
      if (!b) return false;
    return euler_equality;
  }
};

inline MorseInequalityReport check_morse_inequalities(const std::vector<int>& m,
                                                      const std::vector<int>& betti) {
  if (m.size() != betti.size()) throw Error("check_morse_inequalities: length mismatch");
  MorseInequalityReport rep;
  const int n = static_cast<int>(m.size()) - 1;
  for (int N = 0; N <= n; ++N) {
    long long lm = 0, lb = 0;
    for (int i = 0; i <= N; ++i) {
      const long long s = ((N - i) % 2 == 0) ? 1 : -1;
      lm += s * m[i];
      lb += s * betti[i];
    }
    rep.lhs.push_back(lm);
    rep.rhs.push_back(lb);
    rep.holds.push_back(lm >= lb);
  }
  rep.euler_equality = (rep.lhs[n] == rep.rhs[n]);
  rep.strong = true;
  for (int q = 0; q <= n; ++q)
    if (m[q] < betti[q]) rep.strong = false;
  return rep;
}

}  // namespace wittenlab
