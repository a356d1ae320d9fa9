#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/ops.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

struct Counterexample {
  std::vector<double> p;
  double temp = 0.0;
  double temp_prime = 0.0;  // second temperature, when the check compares two
  std::string detail;
};

struct CheckResult {
  std::string name;
  bool pass = true;
  long samples = 0;
  // Meaning depends on the check: smallest strict output gap (ranking),
  // largest identity deviation, largest entropy regression, and so on.
  double worst_margin = 0.0;
  std::optional<Counterexample> counterexample;
};

struct AxiomReport {
  std::string family;
  std::uint64_t seed = 0;
  CheckResult ranking, continuity, entropy_monotone, identity, boundary;
  double continuity_modulus = 0.0;  // empirical modulus estimate, reported not certified
  bool all_pass = false;

  std::vector<const CheckResult*> checks() const {
    return {&ranking, &continuity, &entropy_monotone, &identity, &boundary};
  }
};

struct VerifyConfig {
  int vocab = 8;
  int n_samples = 1000;
  double concentration = 5.0;
  std::uint64_t seed = 42;
  std::vector<double> ranking_temps = {0.1, 0.31622776601683794, 1.0, 3.1622776601683795, 10.0,
                                       31.622776601683793, 100.0};
  std::vector<double> entropy_temps = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  double temp_lo = 1e-3;
  double temp_hi = 1e3;
  std::vector<double> continuity_deltas = {1e-4, 1e-5, 1e-6};
  int continuity_samples = 200;
  double input_margin = 1e-9;   // ranking pairs closer than this are skipped
  double identity_tol = 1e-12;
  double entropy_slack = 1e-10;
  double boundary_tol = 0.01;
  double boundary_mass = 0.99;
};

// ---------------------------------------------------------------------------
// Point-wise evaluators. The sampled checks below are thin loops over these;
// tests use them directly to probe hand-built counterexamples.
// ---------------------------------------------------------------------------

// Smallest output gap over input pairs ordered by more than `margin`;
// negative or zero means a ranking violation. Pairs whose outputs both fall
// below the bottom of double's normal range are skipped: at extreme
// temperatures suppressed entries underflow and their order stops being
// representable, exactly like input pairs inside the margin.
inline double ranking_min_gap(const SoftenFn& fn, const ProbDist& p, Temperature t, double margin) {
  const ProbDist q = fn(p, t);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[i] - p[j] <= margin) continue;
      if (q[i] < 1e-300 && q[j] < 1e-300) continue;
      worst = std::min(worst, q[i] - q[j]);
    }
  return worst;  // +inf when no pair clears the margin
}

inline double identity_gap(const SoftenFn& fn, const ProbDist& p) {
  return linf_distance(fn(p, Temperature(1.0)), p);
}

struct BoundaryEval {
  double dist_uniform;  // at temp_hi
  double argmax_mass;   // at temp_lo
  double tie_split_err; // max |q_i - mass/#ties| over the tied set, at temp_lo
};

inline BoundaryEval boundary_eval(const SoftenFn& fn, const ProbDist& p, double temp_lo,
                                  double temp_hi) {
  BoundaryEval ev{};
  ev.dist_uniform = linf_distance(fn(p, Temperature(temp_hi)), uniform_dist(p.size()));
  const ProbDist cold = fn(p, Temperature(temp_lo));
  const auto ties = argmax_set(p);
  double mass = 0.0;
  for (std::size_t i : ties) mass += cold[i];
  ev.argmax_mass = mass;
  ev.tie_split_err = 0.0;
  const double even = mass / static_cast<double>(ties.size());
  for (std::size_t i : ties) ev.tie_split_err = std::max(ev.tie_split_err, std::abs(cold[i] - even));
  return ev;
}

// ||F(p + v, T + dT) - F(p, T)|| / ||(v, dT)|| for an explicit tangent step.
inline double continuity_ratio(const SoftenFn& fn, const ProbDist& p, double temp,
                               const std::vector<double>& tangent, double dtemp) {
  std::vector<double> shifted = p.values();
  double vnorm2 = 0.0;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    shifted[i] += tangent[i];
    vnorm2 += tangent[i] * tangent[i];
  }
  const ProbDist p2 = ProbDist::validate(std::move(shifted));
  const double num = linf_distance(fn(p2, Temperature(temp + dtemp)), fn(p, Temperature(temp)));
  const double den = std::sqrt(vnorm2 + dtemp * dtemp);
  return num / den;
}

namespace detail {

// Zero-sum tangent of norm `delta` keeping p + v non-negative.
inline std::vector<double> simplex_tangent(const ProbDist& p, double delta, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(p.size());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double mean = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      mean += x;
    }
    mean /= static_cast<double>(v.size());
    double norm = 0.0;
    for (auto& x : v) {
      x -= mean;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0) continue;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] *= delta / norm;
      if (p[i] + v[i] < 0.0) ok = false;
    }
    if (ok) return v;
  }
  fail(errc::no_convergence, "could not find an interior tangent step");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampled checks
// ---------------------------------------------------------------------------

// Axiom: strict input order implies strict output order. Pairs closer than
// the input margin are skipped (strict order at zero margin is float noise).
inline CheckResult check_ranking(const SoftenFn& fn, const VerifyConfig& cfg) {
  CheckResult r;
  r.name = "ranking";
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < cfg.n_samples; ++s) {
    const ProbDist p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 1000 + s));
    for (double T : cfg.ranking_temps) {
      const double gap = ranking_min_gap(fn, p, Temperature(T), cfg.input_margin);
      r.worst_margin = std::min(r.worst_margin, gap);
      if (gap <= 0.0 && !r.counterexample) {
        r.pass = false;
        r.counterexample = Counterexample{p.values(), T, 0.0, "ordered input pair not strictly ordered in output"};
      }
    }
    ++r.samples;
  }
  return r;
}

// Axiom: entropy is non-decreasing in T, checked on consecutive grid pairs.
inline CheckResult check_entropy_monotone(const SoftenFn& fn, const VerifyConfig& cfg) {
  CheckResult r;
  r.name = "entropy_monotone";
  r.worst_margin = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < cfg.n_samples; ++s) {
    const ProbDist p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 2000 + s));
    double prev_h = 0.0;
    for (std::size_t k = 0; k < cfg.entropy_temps.size(); ++k) {
      const double h = entropy(fn(p, Temperature(cfg.entropy_temps[k])));
      if (k > 0) {
        const double drop = prev_h - h;  // positive = entropy regressed
        r.worst_margin = std::max(r.worst_margin, drop);
        if (drop > cfg.entropy_slack && !r.counterexample) {
          r.pass = false;
          r.counterexample = Counterexample{p.values(), cfg.entropy_temps[k - 1], cfg.entropy_temps[k],
                                            "entropy dropped by " + std::to_string(drop)};
        }
      }
      prev_h = h;
    }
    ++r.samples;
  }
  return r;
}

// Axiom: F_1 is the identity, to 1e-12 in max norm.
inline CheckResult check_identity(const SoftenFn& fn, const VerifyConfig& cfg) {
  CheckResult r;
  r.name = "identity";
  for (int s = 0; s < cfg.n_samples; ++s) {
    const ProbDist p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 3000 + s));
    const double gap = identity_gap(fn, p);
    r.worst_margin = std::max(r.worst_margin, gap);
    if (gap >= cfg.identity_tol && !r.counterexample) {
      r.pass = false;
      r.counterexample = Counterexample{p.values(), 1.0, 0.0, "||F_1(p) - p|| = " + std::to_string(gap)};
    }
    ++r.samples;
  }
  return r;
}

// Axiom: T -> inf approaches uniform, T -> 0+ concentrates on the argmax set.
// Tested at finite proxy temperatures, so samples whose top-two log gap is
// unresolvable at temp_lo are redrawn: no finite-T operator can push 99% of
// the mass onto the argmax of a pair it cannot numerically separate. The
// resolvability margin is 2 * temp_lo * ln(100 (V-1)), the separation the
// slowest conforming family (the power transform) needs at temp_lo.
inline CheckResult check_boundary(const SoftenFn& fn, const VerifyConfig& cfg) {
  if (cfg.temp_lo > 1e-3 || cfg.temp_hi < 1e3)
    fail(errc::bad_params, "boundary proxies must satisfy temp_lo <= 1e-3 and temp_hi >= 1e3");
  CheckResult r;
  r.name = "boundary";
  const double min_log_gap =
      2.0 * cfg.temp_lo * std::log(100.0 * static_cast<double>(cfg.vocab - 1));
  for (int s = 0; s < cfg.n_samples; ++s) {
    ProbDist p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 4000 + s));
    for (int retry = 0; retry < 1000; ++retry) {
      std::vector<double> sorted = p.values();
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      if (std::log(sorted[0] / sorted[1]) >= min_log_gap) break;
      p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 4000 + s + 7919 * (retry + 1)));
    }
    const BoundaryEval ev = boundary_eval(fn, p, cfg.temp_lo, cfg.temp_hi);
    const double violation = std::max({ev.dist_uniform - cfg.boundary_tol,
                                       cfg.boundary_mass - ev.argmax_mass,
                                       ev.tie_split_err - cfg.boundary_tol});
    r.worst_margin = std::max(r.worst_margin, violation);
    if (violation > 0.0 && !r.counterexample) {
      r.pass = false;
      r.counterexample = Counterexample{
          p.values(), cfg.temp_lo, cfg.temp_hi,
          "dist_uniform=" + std::to_string(ev.dist_uniform) + " argmax_mass=" + std::to_string(ev.argmax_mass) +
              " tie_split_err=" + std::to_string(ev.tie_split_err)};
    }
    ++r.samples;
  }
  return r;
}

// Axiom: joint continuity in (p, T). Perturbation ratios are measured at each
// delta scale; a Lipschitz operator gives stable ratios while a jump makes
// them grow like 1/delta. Pass requires the max ratio to stay finite and grow
// less than 10x in total from the largest delta to the smallest.
inline CheckResult check_continuity(const SoftenFn& fn, const VerifyConfig& cfg,
                                    double* modulus_out = nullptr) {
  CheckResult r;
  r.name = "continuity";
  std::vector<double> max_ratio(cfg.continuity_deltas.size(), 0.0);
  for (int s = 0; s < cfg.continuity_samples; ++s) {
    std::mt19937_64 rng(mix_seed(cfg.seed, 5000 + s));
    const ProbDist p = sample_interior(cfg.vocab, cfg.concentration, mix_seed(cfg.seed, 6000 + s));
    std::uniform_real_distribution<double> logt(std::log(0.1), std::log(10.0));
    const double T = std::exp(logt(rng));
    for (std::size_t d = 0; d < cfg.continuity_deltas.size(); ++d) {
      const double delta = cfg.continuity_deltas[d];
      const auto v = detail::simplex_tangent(p, delta, rng);
      const double ratio = continuity_ratio(fn, p, T, v, delta);
      if (!std::isfinite(ratio)) {
        r.pass = false;
        if (!r.counterexample)
          r.counterexample = Counterexample{p.values(), T, delta, "non-finite perturbation ratio"};
        continue;
      }
      max_ratio[d] = std::max(max_ratio[d], ratio);
    }
    ++r.samples;
  }
  const double modulus = *std::max_element(max_ratio.begin(), max_ratio.end());
  if (modulus_out) *modulus_out = modulus;
  r.worst_margin = modulus;
  if (max_ratio.front() > 0.0 && max_ratio.back() >= 10.0 * max_ratio.front()) {
    r.pass = false;
    if (!r.counterexample)
      r.counterexample = Counterexample{
          {}, 0.0, 0.0,
          "ratio grew from " + std::to_string(max_ratio.front()) + " to " + std::to_string(max_ratio.back()) +
              " as delta shrank: discontinuity"};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline AxiomReport verify_all(const SoftenFn& fn, const VerifyConfig& cfg,
                              const std::string& family = "custom") {
  AxiomReport rep;
  rep.family = family;
  rep.seed = cfg.seed;
  rep.ranking = check_ranking(fn, cfg);
  rep.continuity = check_continuity(fn, cfg, &rep.continuity_modulus);
  rep.entropy_monotone = check_entropy_monotone(fn, cfg);
  rep.identity = check_identity(fn, cfg);
  rep.boundary = check_boundary(fn, cfg);
  rep.all_pass = rep.ranking.pass && rep.continuity.pass && rep.entropy_monotone.pass &&
                 rep.identity.pass && rep.boundary.pass;
  return rep;
}

inline AxiomReport verify_all(const OperatorSpec& spec, const VerifyConfig& cfg) {
  return verify_all(as_function(spec), cfg, family_name(spec.family));
}

}  // namespace softkd
