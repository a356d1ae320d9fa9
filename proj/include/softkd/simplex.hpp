#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "softkd/error.hpp"

namespace softkd {

// Validation tolerances for probability vectors.
inline constexpr double kSumTol = 1e-9;
inline constexpr double kNegTol = -1e-12;
inline constexpr double kTieTol = 1e-12;

// A validated point on the probability simplex. Entries are non-negative,
// renormalized to sum exactly to 1 at construction, and immutable afterwards.
class ProbDist {
 public:
  // Checks raw values against the simplex constraints; tiny negatives
  // (>= -1e-12) are clamped to zero before the sum check.
  static ProbDist validate(std::vector<double> raw) {
    if (raw.size() < 2) fail(errc::too_short, "need at least 2 entries, got " + std::to_string(raw.size()));
    double sum = 0.0;
    for (double& x : raw) {
      if (!(x >= kNegTol))
        fail(errc::negative_mass, "entry " + std::to_string(x) + " below -1e-12");
      if (x < 0.0) x = 0.0;
      sum += x;
    }
    if (std::abs(sum - 1.0) > kSumTol)
      fail(errc::bad_sum, "sum " + std::to_string(sum) + " outside [1-1e-9, 1+1e-9]");
    renormalize(raw, sum);
    return ProbDist(std::move(raw));
  }

  // For internal construction of operator outputs that are non-negative by
  // construction; renormalizes without the 1e-9 sum gate.
  static ProbDist from_positive(std::vector<double> raw) {
    if (raw.size() < 2) fail(errc::too_short, "need at least 2 entries");
    double sum = 0.0;
    for (double x : raw) {
      if (!(x >= 0.0) || !std::isfinite(x)) fail(errc::negative_mass, "non-finite or negative entry");
      sum += x;
    }
    if (!(sum > 0.0)) fail(errc::bad_sum, "zero total mass");
    renormalize(raw, sum);
    return ProbDist(std::move(raw));
  }

  const std::vector<double>& values() const { return v_; }
  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }

  bool operator==(const ProbDist& o) const { return v_ == o.v_; }

 private:
  explicit ProbDist(std::vector<double> v) : v_(std::move(v)) {}

  // Dividing an already-normalized vector by its float sum drifts entries by
  // an ulp, which would break validate-idempotence; sums within accumulation
  // error of 1 are left alone.
  static void renormalize(std::vector<double>& raw, double sum) {
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(raw.size());
    if (std::abs(sum - 1.0) <= slack) return;
    for (double& x : raw) x /= sum;
  }

  std::vector<double> v_;
};

inline ProbDist uniform_dist(std::size_t v) {
  return ProbDist::from_positive(std::vector<double>(v, 1.0));
}

// Shannon entropy in nats; 0*log(0) := 0.
inline double entropy(const ProbDist& p) {
  double h = 0.0;
  for (double x : p.values())
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

// KL(q || p) = sum_i q_i log(q_i / p_i), in nats. Requires supp(q) within supp(p).
inline double kl_div(const ProbDist& q, const ProbDist& p) {
  if (q.size() != p.size()) fail(errc::dim_mismatch, "sizes differ");
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) {
      if (p[i] <= 0.0)
        fail(errc::support_mismatch, "q has mass at index " + std::to_string(i) + " where p is zero");
      d += q[i] * std::log(q[i] / p[i]);
    }
  }
  return d;
}

// All indices within tie_tol of the maximum, ascending.
inline std::vector<std::size_t> argmax_set(const ProbDist& p, double tie_tol = kTieTol) {
  double m = *std::max_element(p.values().begin(), p.values().end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] >= m - tie_tol) out.push_back(i);
  return out;
}

inline double linf_distance(const ProbDist& a, const ProbDist& b) {
  if (a.size() != b.size()) fail(errc::dim_mismatch, "sizes differ");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double l1_distance(const ProbDist& a, const ProbDist& b) {
  if (a.size() != b.size()) fail(errc::dim_mismatch, "sizes differ");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

// splitmix64: cheap seed derivation so nested loops get independent streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Strictly positive draw from a symmetric Dirichlet(concentration); entries
// below 1e-9 trigger a full redraw so downstream log-domain code never sees
// effective zeros.
inline ProbDist sample_interior(std::size_t v, double concentration, std::uint64_t seed) {
  if (v < 2) fail(errc::too_short, "V must be >= 2");
  if (!(concentration > 0.0)) fail(errc::bad_concentration, "concentration must be > 0");
  std::mt19937_64 rng(mix_seed(seed, 0x5d1c3));
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> x(v);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double sum = 0.0;
    for (auto& e : x) {
      e = gamma(rng);
      sum += e;
    }
    if (!(sum > 0.0)) continue;
    bool interior = true;
    for (double e : x)
      if (e / sum < 1e-9) {
        interior = false;
        break;
      }
    if (interior) return ProbDist::from_positive(x);
  }
  fail(errc::no_convergence, "could not draw an interior point; concentration too small");
}

}  // namespace softkd
