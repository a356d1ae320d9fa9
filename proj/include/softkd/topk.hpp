#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/ops.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// Top-k view of a distribution, as returned by probability-truncating APIs:
// the k largest probabilities with their token ids, plus the full vocabulary
// size. The unobserved tail mass is 1 - sum(probs).
class TruncatedDist {
 public:
  using Entry = std::pair<int, double>;  // (token_id, prob)

  static TruncatedDist validate(std::vector<Entry> entries, int vocab) {
    if (entries.empty()) fail(errc::bad_truncation, "need at least one observed entry");
    if (static_cast<int>(entries.size()) >= vocab)
      fail(errc::bad_truncation, "k must be smaller than V");
    std::unordered_set<int> seen;
    double sum = 0.0, prev = std::numeric_limits<double>::infinity();
    for (const auto& [id, prob] : entries) {
      if (id < 0 || id >= vocab) fail(errc::bad_truncation, "token id " + std::to_string(id) + " outside [0, V)");
      if (!seen.insert(id).second) fail(errc::bad_truncation, "duplicate token id " + std::to_string(id));
      if (!(prob > 0.0)) fail(errc::bad_truncation, "probabilities must be strictly positive");
      if (prob > prev) fail(errc::bad_truncation, "probabilities must be non-increasing");
      prev = prob;
      sum += prob;
    }
    if (sum > 1.0 + 1e-12) fail(errc::bad_truncation, "observed mass " + std::to_string(sum) + " exceeds 1");
    return TruncatedDist(std::move(entries), vocab);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  int vocab() const { return vocab_; }
  int k() const { return static_cast<int>(entries_.size()); }
  double observed_mass() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.second;
    return s;
  }
  double smallest_observed() const { return entries_.back().second; }

  // Unused token ids, ascending: deterministic targets for tail mass.
  std::vector<int> unseen_ids() const {
    std::vector<bool> used(vocab_, false);
    for (const auto& e : entries_) used[e.first] = true;
    std::vector<int> out;
    out.reserve(vocab_ - k());
    for (int i = 0; i < vocab_; ++i)
      if (!used[i]) out.push_back(i);
    return out;
  }

 private:
  TruncatedDist(std::vector<Entry> e, int v) : entries_(std::move(e)), vocab_(v) {}
  std::vector<Entry> entries_;
  int vocab_;
};

enum class CompletionStrategy { renormalize, maxent, zipf };

inline std::string strategy_name(CompletionStrategy s) {
  switch (s) {
    case CompletionStrategy::renormalize: return "renorm";
    case CompletionStrategy::maxent: return "maxent";
    case CompletionStrategy::zipf: return "zipf";
  }
  return "unknown";
}

inline CompletionStrategy strategy_from_name(const std::string& s) {
  if (s == "renorm" || s == "renormalize") return CompletionStrategy::renormalize;
  if (s == "maxent") return CompletionStrategy::maxent;
  if (s == "zipf") return CompletionStrategy::zipf;
  fail(errc::bad_config, "unknown completion strategy '" + s + "'");
}

namespace detail {

// The observed entries can be someone's top-k only if the missing mass fits
// under the smallest observed probability on every unseen slot.
inline void require_feasible_topk(const TruncatedDist& t) {
  const double missing = 1.0 - t.observed_mass();
  const double cap = (t.vocab() - t.k()) * t.smallest_observed();
  if (missing > cap + 1e-12)
    fail(errc::infeasible_topk, "missing mass " + std::to_string(missing) +
                                    " exceeds (V-k) * p_(k) = " + std::to_string(cap));
}

}  // namespace detail

// Drop the unseen mass and renormalize the visible entries to total mass 1.
inline ProbDist renormalize_complete(const TruncatedDist& t) {
  const double s = t.observed_mass();
  std::vector<double> out(t.vocab(), 0.0);
  for (const auto& [id, prob] : t.entries()) out[id] = prob / s;
  return ProbDist::from_positive(std::move(out));
}

// Keep the observed entries and spread the missing mass uniformly over the
// unseen tokens: the entropy-maximizing completion consistent with the
// observation being a true top-k.
inline ProbDist maxent_complete(const TruncatedDist& t) {
  detail::require_feasible_topk(t);
  const double missing = std::max(0.0, 1.0 - t.observed_mass());
  const double share = missing / static_cast<double>(t.vocab() - t.k());
  std::vector<double> out(t.vocab(), share);
  for (const auto& [id, prob] : t.entries()) out[id] = prob;
  return ProbDist::from_positive(std::move(out));
}

// Least-squares slope of ln(prob) against ln(rank), negated. Exact on
// perfectly Zipfian inputs; 0 for flat ones.
inline double zipf_fit(const TruncatedDist& t) {
  const int k = t.k();
  if (k < 2) fail(errc::too_few_points, "zipf fit needs k >= 2");
  bool flat = true;
  for (int r = 1; r < k; ++r) flat = flat && t.entries()[r].second == t.entries()[0].second;
  if (flat) return 0.0;
  double mx = 0, my = 0;
  for (int r = 1; r <= k; ++r) {
    mx += std::log(static_cast<double>(r));
    my += std::log(t.entries()[r - 1].second);
  }
  mx /= k;
  my /= k;
  double num = 0, den = 0;
  for (int r = 1; r <= k; ++r) {
    const double dx = std::log(static_cast<double>(r)) - mx;
    num += dx * (std::log(t.entries()[r - 1].second) - my);
    den += dx * dx;
  }
  return -num / den;
}

// Fill the tail with mass proportional to rank^(-s_z) for ranks k+1..V,
// scaled to the missing mass. Tail entries above p_(k) are capped there and
// the excess spread over the uncapped slots in a single water-filling pass.
// Unseen ranks map to the smallest unused token ids in order.
inline ProbDist zipf_complete(const TruncatedDist& t) {
  const int k = t.k();
  if (k < 2) fail(errc::too_few_points, "zipf completion needs k >= 2");
  detail::require_feasible_topk(t);
  const int tail_n = t.vocab() - k;
  const double missing = std::max(0.0, 1.0 - t.observed_mass());

  std::vector<double> out(t.vocab(), 0.0);
  for (const auto& [id, prob] : t.entries()) out[id] = prob;
  const auto ids = t.unseen_ids();
  if (missing <= 0.0) return ProbDist::from_positive(std::move(out));

  const double sz = zipf_fit(t);
  std::vector<double> w(tail_n);
  double wsum = 0.0;
  for (int i = 0; i < tail_n; ++i) {
    w[i] = std::pow(static_cast<double>(k + 1 + i), -sz);
    wsum += w[i];
  }
  std::vector<double> tail(tail_n);
  for (int i = 0; i < tail_n; ++i) tail[i] = missing * w[i] / wsum;

  // One capping pass: s_z >= 0 makes the raw tail non-increasing, so any
  // entries above the cap form a prefix.
  const double cap = t.smallest_observed();
  double excess = 0.0, free_w = 0.0;
  for (int i = 0; i < tail_n; ++i) {
    if (tail[i] > cap) {
      excess += tail[i] - cap;
      tail[i] = cap;
    } else {
      free_w += w[i];
    }
  }
  if (excess > 0.0) {
    if (free_w <= 0.0) fail(errc::infeasible_topk, "tail cap leaves no room for excess mass");
    for (int i = 0; i < tail_n; ++i)
      if (tail[i] < cap) tail[i] += excess * w[i] / free_w;
  }
  for (int i = 0; i < tail_n; ++i) out[ids[i]] = tail[i];
  return ProbDist::from_positive(std::move(out));
}

inline ProbDist complete(const TruncatedDist& t, CompletionStrategy strategy) {
  switch (strategy) {
    case CompletionStrategy::renormalize: return renormalize_complete(t);
    case CompletionStrategy::maxent: return maxent_complete(t);
    case CompletionStrategy::zipf: return zipf_complete(t);
  }
  fail(errc::bad_config, "unhandled completion strategy");
}

// Complete-then-soften, so the operator always acts on a full simplex point.
inline ProbDist soften_truncated(const OperatorSpec& spec, const TruncatedDist& t,
                                 CompletionStrategy strategy, Temperature temp) {
  return soften(spec, complete(t, strategy), temp);
}

}  // namespace softkd
