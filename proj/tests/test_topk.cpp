#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "softkd/topk.hpp"

using namespace softkd;

namespace {

// Zipf(s) distribution over V tokens, ids assigned in rank order.
ProbDist make_zipf(int v, double s) {
  std::vector<double> p(v);
  for (int r = 1; r <= v; ++r) p[r - 1] = std::pow(double(r), -s);
  return ProbDist::from_positive(std::move(p));
}

TruncatedDist truncate_topk(const ProbDist& p, int k) {
  std::vector<std::pair<int, double>> entries;
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  for (int i = 0; i < k; ++i) entries.emplace_back(order[i], p[order[i]]);
  return TruncatedDist::validate(std::move(entries), static_cast<int>(p.size()));
}

// Random feasible completion: tail values in [0, cap] summing to the missing
// mass, drawn sequentially within the feasibility window.
std::vector<double> random_feasible_tail(double missing, double cap, int slots, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> tail(slots);
  double remaining = missing;
  for (int i = 0; i < slots; ++i) {
    const int left_after = slots - i - 1;
    const double lo = std::max(0.0, remaining - cap * left_after);
    const double hi = std::min(cap, remaining);
    tail[i] = (i == slots - 1) ? remaining : lo + (hi - lo) * u(rng);
    remaining -= tail[i];
  }
  return tail;
}

}  // namespace

TEST_CASE("truncated dist validation") {
  CHECK_NOTHROW(TruncatedDist::validate({{0, 0.5}, {3, 0.3}}, 5));
  CHECK_THROWS_AS(TruncatedDist::validate({}, 5), Error);
  CHECK_THROWS_AS(TruncatedDist::validate({{0, 0.5}, {1, 0.5}}, 2), Error);            // k == V
  CHECK_THROWS_AS(TruncatedDist::validate({{0, 0.3}, {1, 0.5}}, 5), Error);            // increasing
  CHECK_THROWS_AS(TruncatedDist::validate({{0, 0.5}, {0, 0.3}}, 5), Error);            // dup id
  CHECK_THROWS_AS(TruncatedDist::validate({{0, 0.9}, {1, 0.3}}, 5), Error);            // mass > 1
  CHECK_THROWS_AS(TruncatedDist::validate({{7, 0.5}}, 5), Error);                      // id out of range
}

TEST_CASE("renormalize_complete") {
  const auto t = TruncatedDist::validate({{0, 0.5}, {1, 0.3}}, 5);
  const ProbDist q = renormalize_complete(t);
  CHECK(std::abs(q[0] - 0.625) < 1e-12);
  CHECK(std::abs(q[1] - 0.375) < 1e-12);
  for (int i = 2; i < 5; ++i) CHECK(q[i] == 0.0);

  const auto solo = TruncatedDist::validate({{0, 0.9}}, 2);
  const ProbDist qq = renormalize_complete(solo);
  CHECK(qq[0] == 1.0);
  CHECK(qq[1] == 0.0);
}

TEST_CASE("maxent_complete: uniform tail, feasibility gate") {
  const auto t = TruncatedDist::validate({{0, 0.5}, {1, 0.3}}, 5);
  const ProbDist q = maxent_complete(t);
  CHECK(std::abs(q[0] - 0.5) < 1e-12);
  CHECK(std::abs(q[1] - 0.3) < 1e-12);
  for (int i = 2; i < 5; ++i) CHECK(std::abs(q[i] - 0.2 / 3.0) < 1e-12);

  // missing 0.55 > 2 * 0.05: no full distribution has these as its top-2
  CHECK_THROWS_MATCHES(maxent_complete(TruncatedDist::validate({{0, 0.4}, {1, 0.05}}, 4)), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == errc::infeasible_topk; }));

  // s = 1: nothing to distribute
  const auto full = TruncatedDist::validate({{0, 0.6}, {1, 0.4}}, 3);
  const ProbDist qf = maxent_complete(full);
  CHECK(qf[2] == 0.0);
}

TEST_CASE("maxent dominates random feasible completions in entropy") {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> vpick(6, 24), kpick(2, 5);
  for (int c = 0; c < 50; ++c) {
    const int v = vpick(rng), k = std::min(kpick(rng), v - 2);
    const ProbDist base = sample_interior(v, 1.0, 9000 + c);
    const auto t = truncate_topk(base, k);
    const ProbDist me = maxent_complete(t);
    const double h_me = entropy(me);
    const double missing = 1.0 - t.observed_mass();
    for (int r = 0; r < 100; ++r) {
      const auto tail = random_feasible_tail(missing, t.smallest_observed(), v - k, rng);
      std::vector<double> cand(v, 0.0);
      for (const auto& [id, prob] : t.entries()) cand[id] = prob;
      const auto ids = t.unseen_ids();
      for (std::size_t i = 0; i < ids.size(); ++i) cand[ids[i]] = tail[i];
      CHECK(h_me >= entropy(ProbDist::validate(cand)) - 1e-12);
    }
  }
}

TEST_CASE("zipf_fit exact on true zipf, zero on flat") {
  const auto z1 = truncate_topk(make_zipf(6, 1.0), 3);
  CHECK(std::abs(zipf_fit(z1) - 1.0) < 1e-10);

  const auto z2 = truncate_topk(make_zipf(6, 2.0), 3);
  CHECK(std::abs(zipf_fit(z2) - 2.0) < 1e-10);

  const auto flat = TruncatedDist::validate({{0, 0.2}, {1, 0.2}, {2, 0.2}}, 8);
  CHECK(zipf_fit(flat) == 0.0);

  CHECK_THROWS_MATCHES(zipf_fit(TruncatedDist::validate({{0, 0.5}}, 4)), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == errc::too_few_points; }));
}

TEST_CASE("zipf_complete reconstructs synthetically truncated zipf") {
  for (double s : {0.5, 1.0, 2.0})
    for (int v : {4, 8, 16, 64})
      for (int k : {2, 4, 8}) {
        if (k >= v) continue;
        const ProbDist original = make_zipf(v, s);
        const ProbDist rebuilt = zipf_complete(truncate_topk(original, k));
        CHECK(linf_distance(original, rebuilt) < 1e-9);
      }
}

TEST_CASE("zipf_complete edge cases") {
  // missing mass 0: observed entries, zero tail
  const auto full = TruncatedDist::validate({{0, 0.6}, {1, 0.4}}, 4);
  const ProbDist q = zipf_complete(full);
  CHECK(q[2] == 0.0);
  CHECK(q[3] == 0.0);

  // uniform top-k of a uniform distribution reconstructs uniform
  const auto ut = truncate_topk(uniform_dist(6), 3);
  CHECK(linf_distance(zipf_complete(ut), uniform_dist(6)) < 1e-12);

  CHECK_THROWS_AS(zipf_complete(TruncatedDist::validate({{0, 0.4}, {1, 0.05}}, 4)), Error);

  // infeasibility boundary: missing just above vs just below (V-k) * p_(k)
  CHECK_NOTHROW(maxent_complete(TruncatedDist::validate({{0, 0.6}, {1, 0.2}}, 3)));   // 0.2 <= 0.2
  CHECK_THROWS_AS(maxent_complete(TruncatedDist::validate({{0, 0.59}, {1, 0.2}}, 3)), Error);  // 0.21 > 0.2
}

TEST_CASE("completions preserve observed order and validate") {
  std::mt19937_64 rng(4);
  for (int c = 0; c < 30; ++c) {
    const int v = 10;
    const ProbDist base = sample_interior(v, 1.0, 6200 + c);
    const auto t = truncate_topk(base, 4);
    for (auto strat : {CompletionStrategy::renormalize, CompletionStrategy::maxent, CompletionStrategy::zipf}) {
      const ProbDist q = complete(t, strat);
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& [id, prob] : t.entries()) {
        CHECK(q[id] <= prev + 1e-15);
        prev = q[id];
      }
      double sum = 0;
      for (double x : q.values()) sum += x;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("soften_truncated: complete then soften") {
  const auto t = TruncatedDist::validate({{0, 0.5}, {1, 0.3}}, 5);

  // T = 1 leaves the maxent completion unchanged
  const ProbDist id = soften_truncated({OperatorFamily::power}, t, CompletionStrategy::maxent, Temperature(1.0));
  CHECK(linf_distance(id, maxent_complete(t)) == 0.0);

  // power keeps unseen zeros under renormalize completion
  const ProbDist pz = soften_truncated({OperatorFamily::power}, t, CompletionStrategy::renormalize, Temperature(2.0));
  for (int i = 2; i < 5; ++i) CHECK(pz[i] == 0.0);

  // mixing over the maxent completion: 0.5 * q + 0.5 * uniform(5)
  const ProbDist mx = soften_truncated({OperatorFamily::mixing}, t, CompletionStrategy::maxent, Temperature(2.0));
  CHECK(std::abs(mx[0] - 0.35) < 1e-12);
  CHECK(std::abs(mx[1] - 0.25) < 1e-12);
  for (int i = 2; i < 5; ++i) CHECK(std::abs(mx[i] - (0.5 * 0.2 / 3.0 + 0.1)) < 1e-12);
}

TEST_CASE("renormalize-then-power commutes with power-then-renormalize on observed support") {
  std::mt19937_64 rng(8);
  for (int c = 0; c < 30; ++c) {
    const ProbDist base = sample_interior(12, 1.0, 7100 + c);
    const auto t = truncate_topk(base, 5);
    const Temperature T(3.0);

    const ProbDist a = power_soften(renormalize_complete(t), T);

    // soften the visible entries first, then renormalize over them
    std::vector<double> vis;
    for (const auto& e : t.entries()) vis.push_back(e.second);
    double s = 0;
    std::vector<double> pw(vis.size());
    for (std::size_t i = 0; i < vis.size(); ++i) {
      pw[i] = std::pow(vis[i], 1.0 / T.value());
      s += pw[i];
    }
    for (std::size_t i = 0; i < vis.size(); ++i) {
      const int id = t.entries()[i].first;
      CHECK(std::abs(a[id] - pw[i] / s) < 1e-12);
    }
  }
}
