#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// Temperature of a softening operator. Positive, clamped to [1e-6, 1e6].
class Temperature {
 public:
  explicit Temperature(double v) {
    if (!(v > 0.0)) fail(errc::bad_temperature, "temperature must be > 0, got " + std::to_string(v));
    v_ = std::clamp(v, 1e-6, 1e6);
  }
  double value() const { return v_; }

 private:
  double v_;
};

enum class OperatorFamily {
  power,              // q_i = p_i^(1/T) / sum_j p_j^(1/T)
  mixing,             // linear interpolation toward uniform (T>=1) or the argmax vertex (T<1)
  entropy_projection, // power exponent solved so the output hits a scheduled entropy
  broken_sharpener,   // adversarial fixture: exponent T instead of 1/T
};

struct OperatorSpec {
  OperatorFamily family = OperatorFamily::power;
};

inline std::string family_name(OperatorFamily f) {
  switch (f) {
    case OperatorFamily::power: return "power";
    case OperatorFamily::mixing: return "mixing";
    case OperatorFamily::entropy_projection: return "entropy_projection";
    case OperatorFamily::broken_sharpener: return "broken_sharpener";
  }
  return "unknown";
}

inline OperatorFamily family_from_name(const std::string& s) {
  if (s == "power") return OperatorFamily::power;
  if (s == "mixing") return OperatorFamily::mixing;
  if (s == "entropy_projection") return OperatorFamily::entropy_projection;
  if (s == "broken_sharpener") return OperatorFamily::broken_sharpener;
  fail(errc::bad_config, "unknown operator family '" + s + "'");
}

namespace detail {

// Log of a probability, clamped so subnormals cannot produce -inf.
inline double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

}  // namespace detail

// normalize(p^beta), computed in the log domain. Zeros of p stay zero; at
// beta == 1 the input is returned bit-exactly so identity checks are exact.
inline ProbDist apply_power_exponent(const ProbDist& p, double beta) {
  if (beta == 1.0) return p;
  const std::size_t v = p.size();
  std::vector<double> w(v, -std::numeric_limits<double>::infinity());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) {
    if (p[i] > 0.0) {
      w[i] = beta * detail::safe_log(p[i]);
      m = std::max(m, w[i]);
    }
  }
  double z = 0.0;
  for (std::size_t i = 0; i < v; ++i)
    if (p[i] > 0.0) z += std::exp(w[i] - m);
  const double lse = m + std::log(z);
  if (!std::isfinite(lse)) fail(errc::overflow, "non-finite logsumexp in power transform");
  std::vector<double> q(v, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    if (p[i] > 0.0) q[i] = std::exp(w[i] - lse);
  return ProbDist::from_positive(std::move(q));
}

// q_i = p_i^(1/T) / sum_j p_j^(1/T)
inline ProbDist power_soften(const ProbDist& p, Temperature t) {
  return apply_power_exponent(p, 1.0 / t.value());
}

// T >= 1: q = (1/T) p + (1 - 1/T) u.
// T < 1:  q = T p + (1 - T) m, with m uniform over the argmax set of p.
// Both branches are the identity at T = 1.
inline ProbDist mix_soften(const ProbDist& p, Temperature t) {
  const std::size_t v = p.size();
  const double T = t.value();
  std::vector<double> q(v);
  if (T >= 1.0) {
    const double a = 1.0 / T;
    const double ushare = (1.0 - a) / static_cast<double>(v);
    for (std::size_t i = 0; i < v; ++i) q[i] = a * p[i] + ushare;
  } else {
    auto ties = argmax_set(p);
    const double mshare = (1.0 - T) / static_cast<double>(ties.size());
    for (std::size_t i = 0; i < v; ++i) q[i] = T * p[i];
    for (std::size_t i : ties) q[i] += mshare;
  }
  return ProbDist::from_positive(std::move(q));
}

// Entropy target for the projection operator:
//   h(T) = H(p) + (ln V - H(p)) * (1 - 1/T),
// clamped to [ln #argmax-ties, ln V]. The (1 - 1/T) form makes h(1) = H(p)
// bit-exact; it is algebraically ln V - (ln V - H(p))/T.
inline double entropy_schedule(const ProbDist& p, Temperature t) {
  const double h0 = entropy(p);
  const double hmax = std::log(static_cast<double>(p.size()));
  const double hmin = std::log(static_cast<double>(argmax_set(p).size()));
  const double h = h0 + (hmax - h0) * (1.0 - 1.0 / t.value());
  return std::clamp(h, hmin, hmax);
}

namespace detail {

// Entropy of normalize(p^beta) given the logs of the support entries.
inline double entropy_of_power(const std::vector<double>& logs, double beta) {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : logs) m = std::max(m, beta * a);
  double z = 0.0;
  for (double a : logs) z += std::exp(beta * a - m);
  const double lse = m + std::log(z);
  double h = 0.0;
  for (double a : logs) {
    const double w = beta * a - lse;
    h -= std::exp(w) * w;  // exp underflow to 0 kills the term, as intended
  }
  return h;
}

}  // namespace detail

// Solves H(normalize(p^beta)) = h_target for beta by bisection in log(beta)
// over [1e-8, 1e8], using that the entropy is strictly decreasing in beta.
// The bracket is collapsed to ~1e-14 width so the solution is a smooth
// function of the inputs; the achieved entropy is then verified to 1e-10.
inline double solve_exponent(const ProbDist& p, double h_target) {
  std::vector<double> logs;
  logs.reserve(p.size());
  for (double x : p.values())
    if (x > 0.0) logs.push_back(std::log(x));
  const double hmin = std::log(static_cast<double>(argmax_set(p).size()));
  const double hmax = std::log(static_cast<double>(logs.size()));
  if (h_target < hmin - 1e-12 || h_target > hmax + 1e-12)
    fail(errc::target_out_of_range,
         "h_target " + std::to_string(h_target) + " outside [" + std::to_string(hmin) + ", " +
             std::to_string(hmax) + "]");
  const double h0 = entropy(p);
  if (std::abs(h_target - h0) <= 1e-13 * std::max(1.0, std::abs(h0))) return 1.0;

  double tlo = std::log(1e-8), thi = std::log(1e8);
  int iters = 0;
  while (iters < 200 && thi - tlo > 1e-14) {
    const double t = 0.5 * (tlo + thi);
    const double h = detail::entropy_of_power(logs, std::exp(t));
    if (h > h_target)
      tlo = t;  // entropy still too high: raise beta
    else
      thi = t;
    ++iters;
  }
  const double beta = std::exp(0.5 * (tlo + thi));
  const double achieved = detail::entropy_of_power(logs, beta);
  if (std::abs(achieved - h_target) > 1e-10)
    fail(errc::no_convergence, "bisection stalled at H = " + std::to_string(achieved) +
                                   " for target " + std::to_string(h_target));
  return beta;
}

// Minimum-KL distribution at the scheduled entropy level: normalize(p^beta)
// with beta solved against entropy_schedule(p, T). Preserves the argmax of p.
inline ProbDist entropy_project(const ProbDist& p, Temperature t) {
  return apply_power_exponent(p, solve_exponent(p, entropy_schedule(p, t)));
}

inline ProbDist soften(const OperatorSpec& spec, const ProbDist& p, Temperature t) {
  switch (spec.family) {
    case OperatorFamily::power: return power_soften(p, t);
    case OperatorFamily::mixing: return mix_soften(p, t);
    case OperatorFamily::entropy_projection: return entropy_project(p, t);
    case OperatorFamily::broken_sharpener: return apply_power_exponent(p, t.value());
  }
  fail(errc::bad_config, "unhandled operator family");
}

using SoftenFn = std::function<ProbDist(const ProbDist&, Temperature)>;

inline SoftenFn as_function(const OperatorSpec& spec) {
  return [spec](const ProbDist& p, Temperature t) { return soften(spec, p, t); };
}

// softmax(z / T) with max subtraction; the logit-domain reference that the
// probability-domain power operator is checked against.
inline ProbDist logit_reference(const std::vector<double>& z, Temperature t) {
  if (z.size() < 2) fail(errc::too_short, "need at least 2 logits");
  for (double x : z)
    if (!std::isfinite(x)) fail(errc::bad_params, "non-finite logit");
  const double T = t.value();
  double m = -std::numeric_limits<double>::infinity();
  for (double x : z) m = std::max(m, x / T);
  std::vector<double> q(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) q[i] = std::exp(z[i] / T - m);
  return ProbDist::from_positive(std::move(q));
}

}  // namespace softkd
