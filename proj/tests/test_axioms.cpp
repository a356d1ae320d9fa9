#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "softkd/axioms.hpp"

using namespace softkd;

namespace {

VerifyConfig small_config() {
  VerifyConfig cfg;
  cfg.n_samples = 150;
  cfg.continuity_samples = 60;
  cfg.seed = 42;
  return cfg;
}

// Fixture: swaps the two first coordinates of the power output.
ProbDist swap_operator(const ProbDist& p, Temperature t) {
  std::vector<double> q = power_soften(p, t).values();
  std::swap(q[0], q[1]);
  return ProbDist::from_positive(std::move(q));
}

// Fixture: hard jump when the max probability crosses 0.6.
ProbDist threshold_operator(const ProbDist& p, Temperature t) {
  const double pmax = *std::max_element(p.values().begin(), p.values().end());
  if (pmax >= 0.6) return power_soften(p, Temperature(std::max(0.5 * t.value(), 1e-6)));
  return power_soften(p, t);
}

}  // namespace

TEST_CASE("conforming families pass every axiom check") {
  const VerifyConfig cfg = small_config();
  for (OperatorFamily fam :
       {OperatorFamily::power, OperatorFamily::mixing, OperatorFamily::entropy_projection}) {
    const AxiomReport rep = verify_all(OperatorSpec{fam}, cfg);
    INFO("family " << family_name(fam));
    CHECK(rep.ranking.pass);
    CHECK(rep.continuity.pass);
    CHECK(rep.entropy_monotone.pass);
    CHECK(rep.identity.pass);
    CHECK(rep.boundary.pass);
    CHECK(rep.all_pass);
    CHECK(rep.continuity_modulus > 0.0);
    CHECK(std::isfinite(rep.continuity_modulus));
  }
}

TEST_CASE("power and mixing ranking/identity/monotonicity hold at harsh concentration") {
  VerifyConfig cfg = small_config();
  cfg.concentration = 1.0;  // skewed samples
  for (OperatorFamily fam : {OperatorFamily::power, OperatorFamily::mixing}) {
    const SoftenFn fn = as_function(OperatorSpec{fam});
    CHECK(check_ranking(fn, cfg).pass);
    CHECK(check_identity(fn, cfg).pass);
    CHECK(check_entropy_monotone(fn, cfg).pass);
  }
}

TEST_CASE("broken sharpener fails entropy monotonicity with a reproducible counterexample") {
  const VerifyConfig cfg = small_config();
  const OperatorSpec broken{OperatorFamily::broken_sharpener};
  const AxiomReport rep = verify_all(broken, cfg);
  CHECK_FALSE(rep.all_pass);
  CHECK_FALSE(rep.entropy_monotone.pass);
  REQUIRE(rep.entropy_monotone.counterexample.has_value());

  // re-evaluate the counterexample standalone
  const auto& ce = *rep.entropy_monotone.counterexample;
  const ProbDist p = ProbDist::validate(ce.p);
  const double h_lo = entropy(soften(broken, p, Temperature(ce.temp)));
  const double h_hi = entropy(soften(broken, p, Temperature(ce.temp_prime)));
  CHECK(h_hi < h_lo - cfg.entropy_slack);

  // the fixture also misses the uniform limit
  CHECK_FALSE(rep.boundary.pass);
  // but sharpening preserves order and the identity
  CHECK(rep.ranking.pass);
  CHECK(rep.identity.pass);
}

TEST_CASE("coordinate-swap operator fails ranking with witness") {
  const VerifyConfig cfg = small_config();
  const CheckResult r = check_ranking(swap_operator, cfg);
  CHECK_FALSE(r.pass);
  REQUIRE(r.counterexample.has_value());
  const ProbDist p = ProbDist::validate(r.counterexample->p);
  CHECK(ranking_min_gap(swap_operator, p, Temperature(r.counterexample->temp), cfg.input_margin) <= 0.0);
}

TEST_CASE("hard-threshold operator fails the continuity probe") {
  // Point straddling the jump: ratios explode as delta shrinks.
  const ProbDist p = ProbDist::validate({0.6, 0.4});
  std::vector<double> ratios;
  for (double delta : {1e-4, 1e-5, 1e-6}) {
    const std::vector<double> tangent = {-delta / std::sqrt(2.0), delta / std::sqrt(2.0)};
    ratios.push_back(continuity_ratio(threshold_operator, p, 2.0, tangent, delta));
  }
  CHECK(ratios[2] >= 10.0 * ratios[0]);  // the check's failure condition

  // a conforming operator stays stable on the same probe
  std::vector<double> ok_ratios;
  const SoftenFn power = as_function(OperatorSpec{OperatorFamily::power});
  for (double delta : {1e-4, 1e-5, 1e-6}) {
    const std::vector<double> tangent = {-delta / std::sqrt(2.0), delta / std::sqrt(2.0)};
    ok_ratios.push_back(continuity_ratio(power, p, 2.0, tangent, delta));
  }
  CHECK(ok_ratios[2] < 10.0 * ok_ratios[0]);
}

TEST_CASE("boundary evaluator hand cases") {
  const SoftenFn power = as_function(OperatorSpec{OperatorFamily::power});

  const BoundaryEval hi = boundary_eval(power, ProbDist::validate({0.9, 0.1}), 1e-3, 1e3);
  CHECK(hi.dist_uniform < 0.01);
  // T_hi = 1e3: ratio 9^(1/1000), entries ~ [0.50055, 0.49945]
  const ProbDist q = power_soften(ProbDist::validate({0.9, 0.1}), Temperature(1e3));
  CHECK(std::abs(q[0] - 0.50055) < 1e-4);

  // exact ties split evenly at the cold end
  const BoundaryEval tie = boundary_eval(power, ProbDist::validate({0.45, 0.45, 0.10}), 1e-3, 1e3);
  CHECK(tie.argmax_mass >= 0.99);
  CHECK(tie.tie_split_err < 0.01);

  const SoftenFn mixing = as_function(OperatorSpec{OperatorFamily::mixing});
  const BoundaryEval mx = boundary_eval(mixing, ProbDist::validate({0.3, 0.45, 0.25}), 1e-3, 1e3);
  CHECK(mx.argmax_mass >= 0.99);
  CHECK(mx.dist_uniform < 0.01);
}

TEST_CASE("verify_all is deterministic for a fixed seed") {
  const VerifyConfig cfg = small_config();
  const AxiomReport a = verify_all(OperatorSpec{OperatorFamily::power}, cfg);
  const AxiomReport b = verify_all(OperatorSpec{OperatorFamily::power}, cfg);
  CHECK(a.ranking.worst_margin == b.ranking.worst_margin);
  CHECK(a.continuity_modulus == b.continuity_modulus);
  CHECK(a.entropy_monotone.worst_margin == b.entropy_monotone.worst_margin);
  CHECK(a.identity.worst_margin == b.identity.worst_margin);
  CHECK(a.boundary.worst_margin == b.boundary.worst_margin);
}
