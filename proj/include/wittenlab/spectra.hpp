#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "wittenlab/witten.hpp"

namespace wittenlab {

struct EigensolveOptions {
  std::uint64_t seed = 42;
  double rel_tol = 1e-9;         // residual target relative to the operator norm
  int max_iterations = 600;
  long long dense_threshold = 3200;  // densify below this dimension
};

struct SpectrumResult {
  int q = 0;
  double t = 0;
  Vec eigenvalues;                    // ascending, k of them
  std::vector<DiscreteForm> eigenforms;  // unit L2 norm, orthonormal
  Vec residuals;                      // ||A v - lambda v||_2 per pair
  double opnorm = 0;                  // estimate of ||A||
};

namespace detail {

/// Flat-Laplacian preconditioner (Lap + shift)^{-1}, applied componentwise
/// through the per-axis eigenbases of -d^2/dx^2.
class LaplacianPreconditioner {
 public:
  LaplacianPreconditioner(GridPtr g, int q, double shift)
      : grid_(std::move(g)), q_(q), shift_(shift) {}

  Vec apply(const Vec& stacked) const {
    const int C = static_cast<int>(binom(grid_->dim(), q_));
    const long long total = grid_->total();
    Vec out(stacked.size());
    for (int c = 0; c < C; ++c)
      out.segment(c * total, total) = apply_component(stacked.segment(c * total, total));
    return out;
  }

 private:
  Vec apply_component(const Vec& v) const {
    const int n = grid_->dim();
    // transform to the per-axis spectral basis
    Vec w = v;
    for (int a = 0; a < n; ++a) w = grid_->apply_axis(grid_->lap_eigenvectors(a).transpose(), a, w);
    // divide by sum of axis eigenvalues + shift
    for (long long p = 0; p < grid_->total(); ++p) {
      long long rem = p;
      double lam = shift_;
      for (int a = n - 1; a >= 0; --a) {
        const int N = grid_->points()[a];
        lam += grid_->lap_eigenvalues(a)[rem % N];
        rem /= N;
      }
      w[p] /= lam;
    }
    for (int a = 0; a < n; ++a) w = grid_->apply_axis(grid_->lap_eigenvectors(a), a, w);
    return w;
  }

  GridPtr grid_;
  int q_;
  double shift_;
};

/// Orthonormalize columns (SVQB-style), dropping directions that are
/// numerically dependent relative to the block's own scale.
inline Mat orthonormalize(const Mat& S, double drop_tol = 1e-12) {
  if (S.cols() == 0) return S;
  Mat G = S.transpose() * S;
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const Vec& d = es.eigenvalues();
  if (!(d.maxCoeff() > 0)) return Mat(S.rows(), 0);
  const double cutoff = drop_tol * d.maxCoeff();
  int keep = 0;
  for (int i = 0; i < d.size(); ++i)
    if (d[i] > cutoff) ++keep;
  Mat T(S.cols(), keep);
  int c = 0;
  for (int i = 0; i < d.size(); ++i)
    if (d[i] > cutoff) T.col(c++) = es.eigenvectors().col(i) / std::sqrt(d[i]);
  return S * T;
}

/// Twice-iterated block Gram-Schmidt of B against the orthonormal block Q,
/// followed by orthonormalization of what is left. Columns that vanish
/// under projection (relative to their pre-projection size) are dropped;
/// the survivors are genuine new directions however small, which keeps the
/// joint basis well conditioned without discarding fine corrections.
inline Mat ortho_against(const Mat& Q, Mat B, double drop_rel = 1e-10) {
  if (B.cols() == 0) return B;
  Vec before(B.cols());
  for (int j = 0; j < B.cols(); ++j) before[j] = B.col(j).norm();
  for (int pass = 0; pass < 2; ++pass)
    if (Q.cols() > 0) B -= Q * (Q.transpose() * B);
  int keep = 0;
  for (int j = 0; j < B.cols(); ++j)
    if (B.col(j).norm() > drop_rel * before[j]) B.col(keep++) = B.col(j) / B.col(j).norm();
  return orthonormalize(B.leftCols(keep), 1e-12);
}

/// Blocked preconditioned conjugate-gradient eigensolver (LOBPCG, blocks
/// kept mutually orthonormal by explicit Gram-Schmidt) for the smallest
/// eigenpairs of a symmetric PSD operator.
inline void lobpcg(const WittenOperator& op, int k, const EigensolveOptions& opt, double opnorm,
                   Vec& eigenvalues, Mat& eigenvectors, Vec& residuals) {
  const long long dim = op.dim();
  const int block = static_cast<int>(std::min<long long>(dim, k + 4));
  LaplacianPreconditioner prec(op.grid(), op.degree(), 1.0 + op.t());

  auto rng = make_rng(opt.seed);
  std::normal_distribution<double> dist;
  Mat X(dim, block);
  for (long long i = 0; i < dim; ++i)
    for (int j = 0; j < block; ++j) X(i, j) = dist(rng);
  X = orthonormalize(X);

  auto apply_block = [&](const Mat& B) {
    Mat R(B.rows(), B.cols());
    for (int j = 0; j < B.cols(); ++j) R.col(j) = op.apply_stacked(B.col(j));
    return R;
  };

  Mat P(dim, 0);
  const double tol = opt.rel_tol * std::max(opnorm, 1e-300);
  double best_worst = std::numeric_limits<double>::infinity();
  int since_progress = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Mat AX = apply_block(X);
    Mat H = X.transpose() * AX;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
    X = X * es.eigenvectors();
    AX = AX * es.eigenvectors();
    const Vec lam = es.eigenvalues();

    Mat R = AX - X * lam.asDiagonal();
    double worst = 0;
    for (int j = 0; j < std::min(block, k); ++j) worst = std::max(worst, R.col(j).norm());
    if (worst <= tol) {
      eigenvalues = lam.head(k);
      eigenvectors = X.leftCols(k);
      residuals = Vec(k);
      for (int j = 0; j < k; ++j) residuals[j] = R.col(j).norm();
      return;
    }
    if (worst < 0.7 * best_worst) {
      best_worst = worst;
      since_progress = 0;
    } else if (++since_progress > 20) {
      if (P.cols() > 0) {  // restart without the conjugate block
        P = Mat(dim, 0);
        since_progress = 0;
      } else {
        break;
      }
    }

    Mat W(dim, block);
    for (int j = 0; j < block; ++j) W.col(j) = prec.apply(R.col(j));
    W = ortho_against(X, W);
    if (P.cols() > 0) W = ortho_against(P, W);

    Mat S(dim, block + W.cols() + P.cols());
    S << X, W, P;
    Mat AS(dim, S.cols());
    AS << AX, apply_block(W), apply_block(P);

    Mat G = S.transpose() * AS;
    Eigen::SelfAdjointEigenSolver<Mat> rs(0.5 * (G + G.transpose()));
    const int nb = std::min<int>(block, static_cast<int>(S.cols()));
    Mat C = rs.eigenvectors().leftCols(nb);
    Mat Xn = S * C;
    // conjugate block: the new iterate minus its X-component, orthonormalized
    Mat Cw = C.bottomRows(S.cols() - block);
    Mat Pn = S.rightCols(S.cols() - block) * Cw;
    P = ortho_against(Xn, Pn, 1e-6);
    if (P.cols() > block) P = P.leftCols(block);
    X = Xn;
  }
  std::ostringstream os;
  os << "eigensolver did not converge in " << opt.max_iterations << " iterations";
  throw NoConvergence(os.str());
}

}  // namespace detail

/// k smallest eigenpairs of a deformed Laplacian. Dense below
/// dense_threshold, otherwise a seeded blocked preconditioned iteration.
inline SpectrumResult eigensolve(const WittenOperator& op, int k,
                                 const EigensolveOptions& opt = {}) {
  if (k < 1 || k > op.dim()) throw Error("eigensolve: k out of range");
  SpectrumResult out;
  out.q = op.degree();
  out.t = op.t();
  out.opnorm = op.opnorm_estimate(40, opt.seed);
  Mat V;
  if (op.dim() <= opt.dense_threshold) {
    Mat M = op.densify();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    out.eigenvalues = es.eigenvalues().head(k);
    V = es.eigenvectors().leftCols(k);
    out.residuals = Vec(k);
    for (int j = 0; j < k; ++j)
      out.residuals[j] = (M * V.col(j) - out.eigenvalues[j] * V.col(j)).norm();
    out.opnorm = std::max(out.opnorm, std::abs(es.eigenvalues()[op.dim() - 1]));
  } else {
    detail::lobpcg(op, k, opt, out.opnorm, out.eigenvalues, V, out.residuals);
  }
  // repackage eigenvectors as unit-L2 forms (grid quadrature weight)
  const double w = std::sqrt(op.grid()->cell_volume());
  for (int j = 0; j < k; ++j) {
    DiscreteForm f = DiscreteForm::from_stacked(op.grid(), op.degree(), V.col(j) / w);
    out.eigenforms.push_back(f);
  }
  return out;
}

/// Whole spectrum of the degree-q deformed Laplacian on a 1d grid via
/// singular values of the deformed derivative: the complex has one
/// derivative, and both Laplacians share sigma^2(d(t)) as their spectrum.
/// Squared singular values resolve exponentially small eigenvalues far below
/// the absolute floor of a direct symmetric solve.
inline Vec factorized_spectrum_1d(const GridPtr& g, double t, const ClosedOneForm& alpha) {
  if (g->dim() != 1) throw Error("factorized_spectrum_1d: only on the circle");
  Mat d0 = deformed_derivative_matrix(g, 0, t, alpha);
  Eigen::BDCSVD<Mat> svd(d0);
  Vec s = svd.singularValues();  // descending
  Vec out(s.size());
  for (int i = 0; i < s.size(); ++i) out[i] = s[s.size() - 1 - i] * s[s.size() - 1 - i];
  return out;
}

/// Numerically certain kernel floor for factorized 1d spectra: singular
/// values at or below eps * ||d|| are kernel directions; their squares carry
/// no decay information.
inline double factorized_kernel_floor(const GridPtr& g, double t, const ClosedOneForm& alpha) {
  Mat d0 = deformed_derivative_matrix(g, 0, t, alpha);
  const double nrm = d0.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm bound
  const double sigma_floor = 64 * std::numeric_limits<double>::epsilon() * nrm;
  return sigma_floor * sigma_floor;
}

struct GapOptions {
  EigensolveOptions eig;
  double threshold = 1.0;        // "small" means below this
  double open_ratio = 1e-3;      // gap-open criterion
  int max_cluster = 16;
};

namespace detail {

struct ClusterSplit {
  std::vector<double> small;  // eigenvalues below threshold
  double first_large = std::numeric_limits<double>::quiet_NaN();
};

/// Eigensolve with growing k until an eigenvalue past the threshold is seen.
inline ClusterSplit split_spectrum(const WittenOperator& op, const GapOptions& opt) {
  int k = std::min<long long>(op.dim(), 4);
  while (true) {
    SpectrumResult s = eigensolve(op, k, opt.eig);
    if (s.eigenvalues[k - 1] >= std::max(1.5, opt.threshold) || k >= op.dim() ||
        k >= opt.max_cluster) {
      ClusterSplit c;
      for (int i = 0; i < k; ++i) {
        if (s.eigenvalues[i] < opt.threshold)
          c.small.push_back(s.eigenvalues[i]);
        else {
          c.first_large = s.eigenvalues[i];
          break;
        }
      }
      if (static_cast<int>(c.small.size()) == k)
        throw GapNotOpen("no eigenvalue above the small threshold found");
      return c;
    }
    k = std::min<long long>(std::min(2 * k, opt.max_cluster), op.dim());
  }
}

inline void check_gap_open(const ClusterSplit& c, double ratio_bound) {
  if (c.small.empty()) return;  // nothing below the threshold: trivially open
  const double largest_small = c.small.back();
  if (largest_small / c.first_large >= ratio_bound) {
    std::ostringstream os;
    os << "gap not open: largest small " << largest_small << " vs first large "
       << c.first_large;
    throw GapNotOpen(os.str());
  }
}

}  // namespace detail

/// Number of eigenvalues of the degree-q deformed Laplacian below the
/// threshold; requires the spectral gap to be visibly open.
inline int small_count(const GridPtr& g, int q, double t, const ClosedOneForm& alpha,
                       const GapOptions& opt = {}) {
  WittenOperator op(g, q, t, alpha);
  detail::ClusterSplit c = detail::split_spectrum(op, opt);
  detail::check_gap_open(c, opt.open_ratio);
  return static_cast<int>(c.small.size());
}

/// Orthonormal basis of eigenforms with eigenvalue below the threshold.
struct SmallSubspace {
  int q = 0;
  double t = 0;
  std::vector<double> eigenvalues;
  std::vector<DiscreteForm> basis;  // orthonormal under the L2 pairing

  int dimension() const { return static_cast<int>(basis.size()); }

  /// L2-orthogonal projection onto the subspace.
  DiscreteForm project(const DiscreteForm& w) const {
    DiscreteForm out(w.grid, w.degree);
    for (const auto& b : basis) {
      const double c = inner_product(b, w);
      for (int i = 0; i < out.n_components(); ++i) out.comps[i] += c * b.comps[i];
    }
    return out;
  }
};

inline SmallSubspace small_subspace(const GridPtr& g, int q, double t,
                                    const ClosedOneForm& alpha, const GapOptions& opt = {}) {
  WittenOperator op(g, q, t, alpha);
  detail::ClusterSplit c = detail::split_spectrum(op, opt);
  detail::check_gap_open(c, opt.open_ratio);
  SmallSubspace s;
  s.q = q;
  s.t = t;
  if (c.small.empty()) return s;
  SpectrumResult r = eigensolve(op, static_cast<int>(c.small.size()), opt.eig);
  s.eigenvalues = c.small;
  s.basis = r.eigenforms;
  return s;
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  bool valid = false;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const int n = static_cast<int>(x.size());
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0) return f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy * sxx - sx * sxy) / det;
  double ssr = 0, sst = 0;
  for (int i = 0; i < n; ++i) {
    const double p = f.intercept + f.slope * x[i];
    ssr += (y[i] - p) * (y[i] - p);
    sst += (y[i] - sy / n) * (y[i] - sy / n);
  }
  f.r_squared = (sst > 0) ? 1.0 - ssr / sst : 1.0;
  f.valid = true;
  return f;
}

/// Spectral-gap sweep over a t-grid: per-t small cluster and first large
/// eigenvalue, an exponential-decay fit of the largest nonzero small
/// eigenvalue, and a growth fit of the first large one.
struct GapReport {
  int q = 0;
  std::vector<double> t_grid;
  std::vector<std::vector<double>> small;  // per t, ascending
  std::vector<double> first_large;
  LineFit decay_fit;   // log(largest nonzero small) vs t; slope estimates -C2
  LineFit growth_fit;  // first large vs t; slope estimates C3
  int cluster_size = 0;
};

inline GapReport gap_sweep(const GridPtr& g, int q, const std::vector<double>& t_grid,
                           const ClosedOneForm& alpha, const GapOptions& opt = {}) {
  if (t_grid.size() < 4) throw Error("gap_sweep: need at least 4 t values");
  for (size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] <= t_grid[i - 1]) throw Error("gap_sweep: t grid must ascend");

  GapReport rep;
  rep.q = q;
  rep.t_grid = t_grid;
  const bool oned = (g->dim() == 1);
  std::optional<int> cluster;
  std::vector<double> fit_t, fit_y;
  for (double t : t_grid) {
    WittenOperator op(g, q, t, alpha);
    detail::ClusterSplit c = detail::split_spectrum(op, opt);
    if (oned) {
      // refine the small cluster through the factorized route; the direct
      // symmetric solve floors out at eps * ||Delta||
      Vec all = factorized_spectrum_1d(g, t, alpha);
      for (size_t i = 0; i < c.small.size(); ++i) c.small[i] = all[i];
    }
    if (!cluster) cluster = static_cast<int>(c.small.size());
    if (*cluster != static_cast<int>(c.small.size())) {
      std::ostringstream os;
      os << "small cluster changed cardinality along the sweep: " << *cluster << " vs "
         << c.small.size() << " at t = " << t;
      throw ClusterCardinalityChanged(os.str());
    }
    rep.small.push_back(c.small);
    rep.first_large.push_back(c.first_large);

    const double kernel_floor =
        oned ? factorized_kernel_floor(g, t, alpha) : 1e-10;
    double largest_nonzero = 0;
    for (double lam : c.small)
      if (lam > kernel_floor) largest_nonzero = std::max(largest_nonzero, lam);
    if (largest_nonzero > 0) {
      fit_t.push_back(t);
      fit_y.push_back(std::log(largest_nonzero));
    }
  }
  rep.cluster_size = cluster.value_or(0);
  if (fit_t.size() >= 3) rep.decay_fit = fit_line(fit_t, fit_y);
  rep.growth_fit = fit_line(t_grid, rep.first_large);
  return rep;
}

}  // namespace wittenlab
