#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "wittenlab/morse.hpp"
#include "wittenlab/spectra.hpp"

namespace wittenlab {

/// A q-form evaluable at arbitrary points: either grid data (cardinal
/// interpolation, exact on band-limited data) or a closed form.
struct PointForm {
  int degree = 0;
  std::function<Vec(const Vec&)> eval;          // component values, subset order
  std::optional<DiscreteForm> grid_data;        // fast path for full-grid quadrature

  static PointForm from_discrete(const DiscreteForm& f) {
    PointForm p;
    p.degree = f.degree;
    p.grid_data = f;
    p.eval = [f](const Vec& x) { return f.value_at(x); };
    return p;
  }
};

/// Quadrature model of the closure of an unstable cell.
///
/// degree 0: the point itself (integration is evaluation);
/// degree 1: the two flow rays off the critical point, Gauss-Legendre in a
///           trigonometric substitution of the height along each ray;
/// top degree: the cell fills the manifold up to measure zero, so the grid
///           quadrature over the torus with the orientation sign is exact.
struct UnstableCell {
  int point_index = -1;
  int q = 0;
  Vec top;         // the critical point
  double h_top = 0;

  struct Node {
    Vec z;
    Vec tangent;     // d(cell)/dh at the node
    double weight;   // includes the ray sign and the height substitution
    double h;
  };
  std::vector<Node> nodes;  // q = 1

  GridPtr grid;             // q = n
  int grid_sign = 1;
  Vec h_values;             // h at grid nodes, for the exponential weight
};

struct CellOptions {
  int gl_nodes = 96;
  FlowOptions flow;
  double int_tol = 1e-8;
  bool verify_convergence = true;

  CellOptions() { flow.seed_offset = std::nullopt; }
};

namespace detail {

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  // Newton iteration on Legendre polynomials, standard construction
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = t;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1, p1 = t;
    for (int j = 2; j <= n; ++j) {
      double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1);
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

/// Follow one unstable ray by height, recording cell nodes at the
/// Gauss-Legendre heights of the substitution h = c + A cos(psi) over the
/// full critical span [h_bot, h_top]. The substitution cancels the
/// square-root blowup of 1/|grad h| at both ends, so the quadrature covers
/// the whole ray including the collar at the critical point.
inline void descend_ray(const ScalarField& field, const std::vector<CriticalPoint>& pts,
                        int source, const Vec& direction, double ray_sign, int gl_nodes,
                        const FlowOptions& fopt, std::vector<UnstableCell::Node>& out) {
  const double h_top = pts[source].value;
  std::vector<double> gx, gw;
  gauss_legendre(gl_nodes, gx, gw);

  // seed on the unstable axis, high enough that every quadrature height lies
  // below the seed height
  const double lam_max = pts[source].hess_eigenvalues.cwiseAbs().maxCoeff();
  const double psi1 = kPi * (gx[0] + 1) / 2;
  double r0 = fopt.seed(field.manifold());
  {
    detail::ShotResult pre = detail::flow_shot(field, pts, pts[source].coordinates + r0 * direction,
                                               FlowDirection::forward, fopt, Mat(), source);
    if (!pre.captured) throw NoCapture("unstable ray did not reach a rest point");
    const double A_est = (h_top - pts[pre.traj.limit_index].value) / 2;
    const double r_cap = 0.5 * std::sqrt(2 * A_est * (1 - std::cos(psi1)) / lam_max);
    r0 = std::min(r0, r_cap);
  }
  const Vec seed = pts[source].coordinates + r0 * direction;
  const double h_seed = field.value(seed);
  detail::ShotResult probe =
      detail::flow_shot(field, pts, seed, FlowDirection::forward, fopt, Mat(), source);
  if (!probe.captured) throw NoCapture("unstable ray did not reach a rest point");
  const double h_bot = pts[probe.traj.limit_index].value;
  const double c = (h_top + h_bot) / 2, A = (h_top - h_bot) / 2;

  // psi ascending means h descending; integrate the height flow downwards
  Vec y = seed;
  double h_cur = h_seed;
  auto rhs = [&](const Vec& x) {  // d gamma / d eta with eta = -h
    Vec g = field.gradient(x);
    return Vec(-g / g.squaredNorm());
  };
  for (int i = 0; i < gl_nodes; ++i) {
    const double psi = kPi * (gx[i] + 1) / 2;
    const double h_i = c + A * std::cos(psi);
    if (h_i < h_cur) {
      double span = h_cur - h_i;
      detail::integrate_adaptive(rhs, y, span, fopt.ode_rel_tol, fopt.ode_abs_tol,
                                 [](double, const Vec&) { return true; });
      h_cur = h_i;
    }
    Vec g = field.gradient(y);
    UnstableCell::Node node;
    node.z = y;
    node.tangent = g / g.squaredNorm();     // d gamma / dh
    node.h = h_i;
    // ray integral in descent orientation is -int_{h_bot}^{h_top},
    // and d h = -A sin(psi) d psi over psi in [0, pi]
    node.weight = ray_sign * (-1.0) * gw[i] * (kPi / 2) * A * std::sin(psi);
    out.push_back(node);
  }
}

}  // namespace detail

/// Build the quadrature model of the unstable cell of `pts[idx]`.
inline UnstableCell build_unstable_cell(const ScalarField& field,
                                        const std::vector<CriticalPoint>& pts, int idx,
                                        const OrientationChoice& orient,
                                        const GridPtr& grid_for_top,
                                        const CellOptions& opt = {}) {
  const SampleManifold& m = field.manifold();
  const CriticalPoint& x = pts[idx];
  UnstableCell cell;
  cell.point_index = idx;
  cell.q = x.index;
  cell.top = x.coordinates;
  cell.h_top = x.value;
  if (x.index == 0) return cell;

  if (x.index == m.n) {
    cell.grid = grid_for_top;
    const Mat& U = orient.frames[idx];
    cell.grid_sign = (U.determinant() > 0) ? 1 : -1;
    if (m.n == 1) cell.grid_sign = (U(0, 0) > 0) ? 1 : -1;
    cell.h_values = grid_for_top->sample([&](const Vec& z) { return field.value(z); });
    if (m.n > 1) return cell;
    // the circle's top cell is also a pair of rays; prefer the ray model so
    // the same node-concentrated quadrature serves all 1-cells
    cell.grid = nullptr;
  }

  if (x.index != 1) throw Error("build_unstable_cell: only defined up to surfaces");
  FlowOptions fopt = opt.flow;
  if (!fopt.seed_offset) fopt.seed_offset = 1e-5 * m.min_period();
  const Vec u = orient.frames[idx].col(0);

  auto build_nodes = [&](int gl, std::vector<UnstableCell::Node>& nodes) {
    for (double s : {1.0, -1.0})
      detail::descend_ray(field, pts, idx, s * u, s, gl, fopt, nodes);
  };
  build_nodes(opt.gl_nodes, cell.nodes);

  if (opt.verify_convergence) {
    // refining the quadrature must not move the cell measure
    std::vector<UnstableCell::Node> fine;
    build_nodes((3 * opt.gl_nodes) / 2, fine);
    auto measure = [](const UnstableCell::Node& n) { return std::abs(n.weight) * n.tangent.norm(); };
    double m1 = 0, m2 = 0;
    for (const auto& n : cell.nodes) m1 += measure(n);
    for (const auto& n : fine) m2 += measure(n);
    if (std::abs(m1 - m2) > opt.int_tol * (1 + std::abs(m1)))
      throw CellNotConverged("cell measure moved under quadrature refinement");
  }
  return cell;
}

/// Integral over the cell of omega * exp(t (h - h_top)); t = 0 recovers the
/// plain integration map. The shifted weight never exceeds 1 on the cell, so
/// no large exponentials appear at any deformation strength.
inline double integrate_over_unstable_cell(const PointForm& omega, const UnstableCell& cell,
                                           double t_weight = 0.0) {
  if (omega.degree != cell.q) throw DegreeMismatch("cell and form degree differ");
  if (cell.q == 0) return omega.eval(cell.top)[0];

  if (cell.grid) {  // top-degree cell: exact grid quadrature
    const GridPtr& g = cell.grid;
    Vec comp;
    if (omega.grid_data && omega.grid_data->grid == g) {
      comp = omega.grid_data->comps[0];
    } else {
      comp = Vec(g->total());
      for (long long p = 0; p < g->total(); ++p) comp[p] = omega.eval(g->node(p))[0];
    }
    double s = 0;
    for (long long p = 0; p < g->total(); ++p)
      s += comp[p] * std::exp(t_weight * (cell.h_values[p] - cell.h_top));
    return cell.grid_sign * s * g->cell_volume();
  }

  // 1-cells: sum over ray nodes of omega(tangent)
  double s = 0;
  for (const auto& node : cell.nodes) {
    const Vec comps = omega.eval(node.z);
    double pair = 0;
    for (int i = 0; i < node.tangent.size(); ++i) pair += comps[i] * node.tangent[i];
    s += node.weight * pair * std::exp(t_weight * (node.h - cell.h_top));
  }
  return s;
}

using CellSet = std::map<int, UnstableCell>;  // keyed by critical point id

inline CellSet build_cells_of_index(const ScalarField& field,
                                    const std::vector<CriticalPoint>& pts, int q,
                                    const OrientationChoice& orient, const GridPtr& grid,
                                    const CellOptions& opt = {}) {
  CellSet cells;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    if (pts[i].index == q) cells.emplace(i, build_unstable_cell(field, pts, i, orient, grid, opt));
  return cells;
}

/// Largest Stokes defect of the integration map against the incidence
/// matrices: max over index-q points x of
///   | Int(d omega)(x) - sum_y I_q(x, y) Int(omega)(y) |.
inline double int_chain_map_check(const DiscreteForm& omega, const MorseComplex& cx,
                                  const CellSet& cells_q, const CellSet& cells_qm1) {
  const int q = omega.degree + 1;
  DiscreteForm domega = exterior_d(omega);
  PointForm dw = PointForm::from_discrete(domega);
  PointForm w = PointForm::from_discrete(omega);
  const auto& upper = cx.generators[q];
  const auto& lower = cx.generators[q - 1];
  double worst = 0;
  for (size_t r = 0; r < upper.size(); ++r) {
    double lhs = integrate_over_unstable_cell(dw, cells_q.at(upper[r]));
    double rhs = 0;
    for (size_t c = 0; c < lower.size(); ++c)
      rhs += cx.incidence[q](r, c) * integrate_over_unstable_cell(w, cells_qm1.at(lower[c]));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

/// Cutoff Gaussian comparison form centered at a critical point, oriented
/// along the chosen unstable frame and normalized to unit grid L2 norm. The
/// cutoff is identically 1 inside kappa * eta and 0 beyond eta.
struct Quasimode {
  SampleManifold manifold;
  Vec center;
  double t = 1;
  double eta = 1;
  double kappa = 0.7;
  int q = 0;
  Vec comp_coeffs;     // frame wedge expanded over index subsets
  double amplitude = 1;
  Mat exp_matrix;      // |Hess h| at the center; the admissible-chart model
                       // has the identity here, general flat models do not

  double cutoff(double r) const {
    const double a = kappa * eta, b = eta;
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    const double s = (r - a) / (b - a);
    const double g1 = std::exp(-1.0 / (1.0 - s)), g0 = std::exp(-1.0 / s);
    return g1 / (g1 + g0);
  }

  Vec value_at(const Vec& x) const {
    const Vec d = manifold.displacement(x, center);
    const double r = d.norm();
    const double scalar =
        amplitude * cutoff(r) * std::exp(-t * d.dot(exp_matrix * d) / 2);
    return scalar * comp_coeffs;
  }

  DiscreteForm sample(const GridPtr& g) const {
    DiscreteForm f(g, q);
    for (long long p = 0; p < g->total(); ++p) {
      const Vec v = value_at(g->node(p));
      for (int c = 0; c < f.n_components(); ++c) f.comps[c][p] = v[c];
    }
    return f;
  }

  PointForm as_point_form() const {
    PointForm p;
    p.degree = q;
    Quasimode self = *this;
    p.eval = [self](const Vec& x) { return self.value_at(x); };
    return p;
  }
};

inline double min_critical_distance(const SampleManifold& m,
                                    const std::vector<CriticalPoint>& pts) {
  double d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      d = std::min(d, m.distance(pts[i].coordinates, pts[j].coordinates));
  return d;
}

inline Quasimode build_cutoff_quasimode(const GridPtr& grid,
                                        const std::vector<CriticalPoint>& pts, int idx,
                                        double t, double eta, const OrientationChoice& orient) {
  const SampleManifold& m = grid->manifold();
  if (!(t > 0)) throw Error("build_cutoff_quasimode: t > 0 required");
  const double dmin = min_critical_distance(m, pts);
  if (2 * eta > dmin)
    throw SupportOverlap("cutoff radius exceeds half the critical separation");

  const CriticalPoint& y = pts[idx];
  Quasimode qm;
  qm.manifold = m;
  qm.center = y.coordinates;
  qm.t = t;
  qm.eta = eta;
  qm.q = y.index;
  qm.exp_matrix = y.hess_eigenvectors *
                  y.hess_eigenvalues.cwiseAbs().asDiagonal() *
                  y.hess_eigenvectors.transpose();
  const Mat frame = orient.frames[idx];  // n x q
  const auto masks = subsets_of_size(m.n, qm.q);
  qm.comp_coeffs = Vec(masks.size());
  for (size_t c = 0; c < masks.size(); ++c) {
    const auto rows = mask_to_indices(masks[c]);
    Mat minor(qm.q, qm.q);
    for (int r = 0; r < qm.q; ++r)
      for (int cc = 0; cc < qm.q; ++cc) minor(r, cc) = frame(rows[r], cc);
    qm.comp_coeffs[c] = (qm.q == 0) ? 1.0 : minor.determinant();
  }
  qm.amplitude = std::pow(t / kPi, m.n / 4.0);
  // normalize on the grid so the frame Gram matrix is exactly orthonormal
  const double nrm = l2_norm(qm.sample(grid));
  qm.amplitude /= nrm;
  return qm;
}

enum class ScalingConvention { pi_over_t, t_over_pi };

/// Curvature factor restoring the admissible-chart normalization on flat
/// models: (prod over unstable |lambda_i|)^{1/4} (prod over stable
/// lambda_i)^{-1/4} from the Hessian spectrum at the point. Equal to 1
/// whenever all |lambda_i| = 1.
inline double hessian_scaling_factor(const CriticalPoint& p) {
  double f = 1;
  for (int i = 0; i < p.hess_eigenvalues.size(); ++i) {
    const double a = std::abs(p.hess_eigenvalues[i]);
    f *= (i < p.index) ? std::pow(a, 0.25) : std::pow(a, -0.25);
  }
  return f;
}

/// Diagonal comparison scaling: base^{(n-2q)/4} e^{-t h(x)} per generator.
inline Vec scaling_matrix(int n, int q, double t, const std::vector<CriticalPoint>& pts,
                          const std::vector<int>& generators,
                          ScalingConvention conv = ScalingConvention::pi_over_t) {
  if (!(t > 0)) throw Error("scaling_matrix: t > 0 required");
  const double base = (conv == ScalingConvention::pi_over_t) ? kPi / t : t / kPi;
  const double p = (n - 2.0 * q) / 4.0;
  Vec diag(generators.size());
  for (size_t i = 0; i < generators.size(); ++i)
    diag[i] = std::pow(base, p) * hessian_scaling_factor(pts[generators[i]]) *
              std::exp(-t * pts[generators[i]].value);
  return diag;
}

/// Comparison frame: quasimodes J and the orthonormalized family
/// R = J (J^T J)^{-1/2} (grid inner products).
struct QuasimodeFrame {
  int q = 0;
  double t = 0;
  std::vector<int> generators;
  std::vector<Quasimode> modes;
  std::vector<DiscreteForm> mode_grids;
  Mat gram;
  Mat gram_inv_sqrt;

  int size() const { return static_cast<int>(generators.size()); }

  /// R column j as a closed-form evaluator.
  PointForm r_column(int j) const {
    PointForm p;
    p.degree = q;
    std::vector<Quasimode> ms = modes;
    Vec coeff = gram_inv_sqrt.col(j);
    p.eval = [ms, coeff](const Vec& x) {
      Vec acc = ms[0].value_at(x) * coeff[0];
      for (size_t i = 1; i < ms.size(); ++i) acc += ms[i].value_at(x) * coeff[i];
      return acc;
    };
    return p;
  }

  DiscreteForm r_column_grid(int j) const {
    DiscreteForm acc = gram_inv_sqrt(0, j) * mode_grids[0];
    for (int i = 1; i < size(); ++i) acc = acc + gram_inv_sqrt(i, j) * mode_grids[i];
    return acc;
  }
};

struct JRResult {
  QuasimodeFrame frame;
  double projected_residual = std::numeric_limits<double>::quiet_NaN();
};

inline QuasimodeFrame build_quasimode_frame(const GridPtr& grid,
                                            const std::vector<CriticalPoint>& pts, int q,
                                            double t, const OrientationChoice& orient,
                                            std::optional<double> eta_opt = std::nullopt) {
  const double eta = eta_opt.value_or(0.4 * min_critical_distance(grid->manifold(), pts));
  QuasimodeFrame f;
  f.q = q;
  f.t = t;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    if (pts[i].index == q) f.generators.push_back(i);
  for (int g : f.generators) {
    f.modes.push_back(build_cutoff_quasimode(grid, pts, g, t, eta, orient));
    f.mode_grids.push_back(f.modes.back().sample(grid));
  }
  const int mq = f.size();
  f.gram = Mat(mq, mq);
  for (int i = 0; i < mq; ++i)
    for (int j = 0; j < mq; ++j) f.gram(i, j) = inner_product(f.mode_grids[i], f.mode_grids[j]);
  Eigen::SelfAdjointEigenSolver<Mat> es(f.gram);
  const Vec& ev = es.eigenvalues();
  if (mq > 0 && ev.minCoeff() <= 0)
    throw SingularGram("quasimode Gram matrix is not positive definite");
  if (mq > 0 && ev.maxCoeff() / ev.minCoeff() > 1e8)
    throw SingularGram("quasimode Gram matrix condition number exceeds 1e8");
  f.gram_inv_sqrt = Mat::Zero(mq, mq);
  if (mq > 0)
    f.gram_inv_sqrt =
        es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
  return f;
}

/// J, R and the distance of the quasimodes from the small subspace.
inline JRResult build_J_R(const GridPtr& grid, const std::vector<CriticalPoint>& pts, int q,
                          double t, const OrientationChoice& orient,
                          const SmallSubspace& small,
                          std::optional<double> eta_opt = std::nullopt) {
  JRResult out;
  out.frame = build_quasimode_frame(grid, pts, q, t, orient, eta_opt);
  double worst = 0;
  for (const auto& mode : out.frame.mode_grids) {
    DiscreteForm res = mode - small.project(mode);
    worst = std::max(worst, l2_norm(res));
  }
  out.projected_residual = worst;
  return out;
}

struct WhsOptions {
  ScalingConvention convention = ScalingConvention::pi_over_t;
  std::optional<double> eta;
  CellOptions cell;
  GapOptions gap;
  bool with_localization = true;
};

struct WhsRow {
  double t = 0;
  double deviation = 0;                 // ||L R - Id||_2
  std::vector<double> exterior_mass;    // per generator, after projection to
                                        // the small subspace
  double projection_residual = 0;
};

struct WhsReport {
  int q = 0;
  std::vector<int> generators;
  std::vector<WhsRow> rows;
};

/// The comparison composite on the small data: entries
///   [L R]_{xy} = base^{(n-2q)/4} * Int( R_y * e^{t (h - h(x))} ) over the
/// cell of x, which is the scaled comparison map with the exponential factor
/// folded into the quadrature.
inline Mat whs_composite_matrix(const QuasimodeFrame& frame, const CellSet& cells,
                                const std::vector<CriticalPoint>& pts, int n,
                                ScalingConvention conv) {
  const int mq = frame.size();
  Mat LR(mq, mq);
  const double base = (conv == ScalingConvention::pi_over_t) ? kPi / frame.t : frame.t / kPi;
  const double p = (n - 2.0 * frame.q) / 4.0;
  for (int col = 0; col < mq; ++col) {
    PointForm r = frame.r_column(col);
    for (int row = 0; row < mq; ++row) {
      const UnstableCell& cell = cells.at(frame.generators[row]);
      const double hf = hessian_scaling_factor(pts[frame.generators[row]]);
      LR(row, col) = std::pow(base, p) * hf * integrate_over_unstable_cell(r, cell, frame.t);
    }
  }
  return LR;
}

inline WhsReport whs_compare(const GridPtr& grid, const ScalarField& field,
                             const std::vector<CriticalPoint>& pts,
                             const OrientationChoice& orient, int q,
                             const std::vector<double>& t_grid, const WhsOptions& opt = {}) {
  const ClosedOneForm alpha = ClosedOneForm::exact(field);
  const int n = grid->dim();
  WhsReport rep;
  rep.q = q;
  CellSet cells = build_cells_of_index(field, pts, q, orient, grid, opt.cell);
  const double eta = opt.eta.value_or(0.4 * min_critical_distance(grid->manifold(), pts));

  for (double t : t_grid) {
    QuasimodeFrame frame = build_quasimode_frame(grid, pts, q, t, orient, eta);
    if (rep.generators.empty()) rep.generators = frame.generators;
    WhsRow row;
    row.t = t;
    const int mq = frame.size();
    if (mq > 0) {
      Mat LR = whs_composite_matrix(frame, cells, pts, n, opt.convention);
      Eigen::JacobiSVD<Mat> svd(LR - Mat::Identity(mq, mq));
      row.deviation = (mq > 0) ? svd.singularValues()[0] : 0.0;
    }
    if (opt.with_localization && mq > 0) {
      SmallSubspace small = small_subspace(grid, q, t, alpha, opt.gap);
      double worst_res = 0;
      for (int j = 0; j < mq; ++j) {
        DiscreteForm proj = small.project(frame.mode_grids[j]);
        DiscreteForm res = frame.mode_grids[j] - proj;
        worst_res = std::max(worst_res, l2_norm(res));
        // mass of the localized representative outside the cutoff ball
        const Vec& cy = pts[frame.generators[j]].coordinates;
        double mass2 = 0;
        for (long long p = 0; p < grid->total(); ++p) {
          if (grid->manifold().distance(grid->node(p), cy) <= eta) continue;
          for (int c = 0; c < proj.n_components(); ++c)
            mass2 += proj.comps[c][p] * proj.comps[c][p];
        }
        row.exterior_mass.push_back(std::sqrt(mass2 * grid->cell_volume()));
      }
      row.projection_residual = worst_res;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

/// Matrix of the integration map against a small-subspace basis; its
/// invertibility is the computable core of the comparison isomorphism.
inline Mat int_on_small_basis(const SmallSubspace& small, const CellSet& cells,
                              const std::vector<int>& generators) {
  const int mq = static_cast<int>(generators.size());
  Mat M(mq, small.dimension());
  for (int j = 0; j < small.dimension(); ++j) {
    PointForm w = PointForm::from_discrete(small.basis[j]);
    for (int i = 0; i < mq; ++i)
      M(i, j) = integrate_over_unstable_cell(w, cells.at(generators[i]));
  }
  return M;
}

}  // namespace wittenlab
