#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wittenlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// manifold
struct DegenerateCritical : Error { using Error::Error; };
struct ScanTooCoarse : Error { using Error::Error; };

// forms / operators
struct TopDegree : Error { using Error::Error; };
struct BottomDegree : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonClosedForm : Error { using Error::Error; };
struct DegreeMismatch : Error { using Error::Error; };

// spectra
struct NoConvergence : Error { using Error::Error; };
struct GapNotOpen : Error { using Error::Error; };
struct ClusterCardinalityChanged : Error { using Error::Error; };

// morse
struct NoCapture : Error { using Error::Error; };
struct NonTransversal : Error { using Error::Error; };

// whs
struct CellNotConverged : Error { using Error::Error; };
struct SupportOverlap : Error { using Error::Error; };
struct SingularGram : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };
struct ComputeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

inline constexpr double kPi = 3.14159265358979323846;

// Deterministic RNG used everywhere randomness is needed.
inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// ----- index subsets (form components), encoded as bitmasks over axes 0..n-1 -----

inline int popcount(std::uint32_t m) { return __builtin_popcount(m); }

/// All strictly increasing index subsets of size q out of n axes, ordered
/// lexicographically (mask value order).
inline std::vector<std::uint32_t> subsets_of_size(int n, int q) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < (1u << n); ++m)
    if (popcount(m) == q) out.push_back(m);
  return out;
}

inline long long binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

/// Sign (-1)^{#{j in mask : j < i}} picked up when moving dx_i past the
/// factors of dx_mask that precede it.
inline int insertion_sign(std::uint32_t mask, int i) {
  std::uint32_t below = mask & ((1u << i) - 1u);
  return (popcount(below) % 2 == 0) ? 1 : -1;
}

/// Sign of the shuffle permutation merging two disjoint masks I, J into
/// sorted order (I-factors written first).
inline int merge_sign(std::uint32_t maskI, std::uint32_t maskJ) {
  int sign = 1;
  for (int i = 0; i < 32; ++i)
    if (maskI & (1u << i)) {
      std::uint32_t jbelow = maskJ & ((1u << i) - 1u);
      if (popcount(jbelow) % 2 != 0) sign = -sign;
    }
  return sign;
}

/// Sign of the permutation (I, complement(I)) of (1..n); the Hodge-star sign.
inline int complement_sign(std::uint32_t mask, int n) {
  std::uint32_t comp = ~mask & ((1u << n) - 1u);
  return merge_sign(mask, comp);
}

inline std::vector<int> mask_to_indices(std::uint32_t mask) {
  std::vector<int> v;
  for (int i = 0; i < 32; ++i)
    if (mask & (1u << i)) v.push_back(i);
  return v;
}

}  // namespace wittenlab
