// softkd: probability-domain softening operators, top-k completion, axiom
// certification, KD-equivalence checks and the prune-and-distill simulator,
// behind one CLI.
//
// Exit codes: 0 success, 1 IO/runtime failure, 2 usage or validation error,
// 3 scientific assertion failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "softkd/axioms.hpp"
#include "softkd/data.hpp"
#include "softkd/equiv.hpp"
#include "softkd/io.hpp"
#include "softkd/ops.hpp"
#include "softkd/sim.hpp"
#include "softkd/topk.hpp"

using namespace softkd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAssertion = 3;

std::optional<std::uint64_t> env_seed_override() {
  const char* v = std::getenv("SOFTKD_SEED");
  if (!v || !*v) return std::nullopt;
  return std::strtoull(v, nullptr, 10);
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case errc::io_failure:
      return kExitRuntime;
    case errc::negative_mass:
    case errc::bad_sum:
    case errc::too_short:
    case errc::dim_mismatch:
    case errc::bad_truncation:
    case errc::infeasible_topk:
    case errc::too_few_points:
    case errc::bad_config:
    case errc::bad_params:
    case errc::bad_temperature:
    case errc::bad_concentration:
    case errc::grid_too_large:
    case errc::bad_rho:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open input file " + path);
  return in;
}

// ---------------------------------------------------------------------------
// soften / complete
// ---------------------------------------------------------------------------

struct SoftenArgs {
  std::string op = "power";
  double temp = 1.0;
  std::string in_path, out_path;
  int digits = 0;  // 0 = full precision (17 significant digits)
};

int cmd_soften(const SoftenArgs& a) {
  const OperatorSpec spec{family_from_name(a.op)};
  const Temperature temp(a.temp);
  auto in = open_input(a.in_path);
  const auto dists = read_dists_jsonl(in);
  std::string out;
  for (const auto& p : dists) out += format_prob_line(soften(spec, p, temp), a.digits) + "\n";
  atomic_write(a.out_path, out);
  return kExitOk;
}

struct CompleteArgs {
  std::string strategy = "maxent";
  int vocab = 0;
  std::string in_path, out_path;
  std::string op;  // optional: soften after completion
  double temp = 1.0;
  int digits = 0;
};

int cmd_complete(const CompleteArgs& a) {
  const CompletionStrategy strategy = strategy_from_name(a.strategy);
  auto in = open_input(a.in_path);
  const auto truncs = read_truncated_jsonl(in, a.vocab);
  std::string out;
  for (const auto& t : truncs) {
    ProbDist p = a.op.empty()
                     ? complete(t, strategy)
                     : soften_truncated({family_from_name(a.op)}, t, strategy, Temperature(a.temp));
    out += format_prob_line(p, a.digits) + "\n";
  }
  atomic_write(a.out_path, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string op = "power";
  int samples = 1000;
  std::uint64_t seed = 42;
  int vocab = 8;
  double concentration = 5.0;
  std::string out_path;
};

int cmd_verify(const VerifyArgs& a) {
  const OperatorSpec spec{family_from_name(a.op)};
  VerifyConfig cfg;
  cfg.n_samples = a.samples;
  cfg.continuity_samples = std::min(a.samples, 200);
  cfg.seed = env_seed_override().value_or(a.seed);
  cfg.vocab = a.vocab;
  cfg.concentration = a.concentration;

  const AxiomReport rep = verify_all(spec, cfg);
  const std::string text = to_json(rep).dump(2) + "\n";
  if (!a.out_path.empty())
    atomic_write(a.out_path, text);
  else
    std::cout << text;
  for (const CheckResult* c : rep.checks())
    std::cerr << (c->pass ? "[pass] " : "[FAIL] ") << c->name << " (worst margin "
              << format_number(c->worst_margin, 6) << ")\n";
  return rep.all_pass ? kExitOk : kExitAssertion;
}

// ---------------------------------------------------------------------------
// equiv
// ---------------------------------------------------------------------------

struct EquivArgs {
  std::string op_a = "power", op_b = "mixing";
  std::string cls = "unrestricted";
  int vocab = 2;
  int grid = 10;
  double temp = 2.0;
  std::string teachers_path;
  int samples = 5;
  std::uint64_t seed = 7;
  double concentration = 1.0;
  std::string out_path;
};

int cmd_equiv(const EquivArgs& a) {
  StudentClassSpec cls;
  cls.vocab = a.vocab;
  if (a.cls == "grid") {
    cls.kind = StudentClassKind::simplex_grid;
    cls.grid_resolution = a.grid;
  } else if (a.cls == "unrestricted") {
    cls.kind = StudentClassKind::unrestricted;
  } else {
    fail(errc::bad_config, "--class must be 'grid' or 'unrestricted'");
  }

  std::vector<ProbDist> teachers;
  if (!a.teachers_path.empty()) {
    auto in = open_input(a.teachers_path);
    teachers = read_dists_jsonl(in);
  } else {
    const std::uint64_t seed = env_seed_override().value_or(a.seed);
    for (int i = 0; i < a.samples; ++i)
      teachers.push_back(sample_interior(a.vocab, a.concentration, mix_seed(seed, i)));
  }

  const EquivVerdict v = kd_equiv_check({family_from_name(a.op_a)}, {family_from_name(a.op_b)}, cls,
                                        teachers, Temperature(a.temp));
  const std::string text = to_json(v).dump(2) + "\n";
  if (!a.out_path.empty())
    atomic_write(a.out_path, text);
  else
    std::cout << text;
  std::cerr << (v.equivalent ? "equivalent" : "not equivalent") << " over " << teachers.size()
            << " teachers\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate / biasvar / sweep
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  ExperimentSetup setup;
  PruneSchedule schedule;
  OperatorSpec spec;
  double temp = 2.0;
  // pipeline experiment
  bool pipeline_enabled = true;
  int pipeline_seeds = 10;
  int pipeline_min_wins = 9;
  // bias-variance experiment
  bool biasvar_enabled = true;
  int biasvar_students = 10;
  int biasvar_epochs = 6;
  int biasvar_subsample = 150;  // per-student bootstrap draw of the train split
  std::vector<double> biasvar_levels = {0.0, 0.8};
  int biasvar_seeds = 10;
  int biasvar_min_wins = 8;
  // convergence sweep
  bool sweep_enabled = true;
  std::vector<int> sweep_n_list = {1, 2, 4, 8};
  int sweep_total_epochs = 24;
  int sweep_seeds = 5;
  std::vector<int> sweep_arch;        // optional override; empty = task arch
  double sweep_rho_target = 0.0;      // optional override; 0 = schedule value
  bool sweep_assert_trend = true;  // smoke-scale configs can record without gating
};

ExperimentConfig parse_config(const std::string& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(errc::bad_config, std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("task")) {
      const auto& t = j["task"];
      c.setup.dim = t.value("dim", c.setup.dim);
      c.setup.classes = t.value("classes", c.setup.classes);
      c.setup.samples = t.value("samples", c.setup.samples);
      c.setup.noise = t.value("noise", c.setup.noise);
      c.setup.task_seed = t.value("seed", c.setup.task_seed);
    }
    if (j.contains("arch")) c.setup.arch = j["arch"].get<std::vector<int>>();
    if (j.contains("teacher")) {
      const auto& t = j["teacher"];
      c.setup.teacher.epochs = t.value("epochs", c.setup.teacher.epochs);
      c.setup.teacher.eta = t.value("eta", c.setup.teacher.eta);
      c.setup.teacher.batch = t.value("batch", c.setup.teacher.batch);
      c.setup.teacher.seed = t.value("seed", c.setup.teacher.seed);
    }
    if (j.contains("probe")) {
      c.setup.probe_size = j["probe"].value("size", c.setup.probe_size);
      c.setup.probe_seed = j["probe"].value("seed", c.setup.probe_seed);
    }
    if (j.contains("operator")) c.spec.family = family_from_name(j["operator"].value("family", "power"));
    c.temp = j.value("temperature", c.temp);
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      c.schedule.n_stages = s.value("n_stages", c.schedule.n_stages);
      c.schedule.rho_target = s.value("rho_target", c.schedule.rho_target);
      c.schedule.epochs_per_stage = s.value("epochs_per_stage", c.schedule.epochs_per_stage);
      c.schedule.eta = s.value("eta", c.schedule.eta);
      c.schedule.batch = s.value("batch", c.schedule.batch);
      c.schedule.seed = s.value("seed", c.schedule.seed);
    }
    if (j.contains("experiments")) {
      const auto& e = j["experiments"];
      if (e.contains("pipeline")) {
        c.pipeline_enabled = e["pipeline"].value("enabled", true);
        c.pipeline_seeds = e["pipeline"].value("seeds", c.pipeline_seeds);
        c.pipeline_min_wins = e["pipeline"].value("min_wins", c.pipeline_min_wins);
      }
      if (e.contains("biasvar")) {
        c.biasvar_enabled = e["biasvar"].value("enabled", true);
        c.biasvar_students = e["biasvar"].value("students", c.biasvar_students);
        c.biasvar_epochs = e["biasvar"].value("epochs", c.biasvar_epochs);
        c.biasvar_subsample = e["biasvar"].value("train_subsample", c.biasvar_subsample);
        if (e["biasvar"].contains("sparsity_levels"))
          c.biasvar_levels = e["biasvar"]["sparsity_levels"].get<std::vector<double>>();
        c.biasvar_seeds = e["biasvar"].value("seeds", c.biasvar_seeds);
        c.biasvar_min_wins = e["biasvar"].value("min_wins", c.biasvar_min_wins);
      }
      if (e.contains("sweep")) {
        c.sweep_enabled = e["sweep"].value("enabled", true);
        if (e["sweep"].contains("n_list")) c.sweep_n_list = e["sweep"]["n_list"].get<std::vector<int>>();
        c.sweep_total_epochs = e["sweep"].value("total_epochs", c.sweep_total_epochs);
        c.sweep_seeds = e["sweep"].value("seeds", c.sweep_seeds);
        c.sweep_assert_trend = e["sweep"].value("assert_trend", c.sweep_assert_trend);
        if (e["sweep"].contains("arch")) c.sweep_arch = e["sweep"]["arch"].get<std::vector<int>>();
        c.sweep_rho_target = e["sweep"].value("rho_target", c.sweep_rho_target);
      }
    }
  } catch (const json::exception& e) {
    fail(errc::bad_config, std::string("config field error: ") + e.what());
  }
  c.schedule.validate();
  if (c.setup.arch.size() < 2 || c.setup.arch.front() != c.setup.dim || c.setup.arch.back() != c.setup.classes)
    fail(errc::bad_config, "arch endpoints must match task dim and classes");
  if (const auto env = env_seed_override()) {
    c.setup.task_seed = mix_seed(*env, 1);
    c.setup.teacher.seed = mix_seed(*env, 2);
    c.setup.probe_seed = mix_seed(*env, 3);
    c.schedule.seed = mix_seed(*env, 4);
  }
  return c;
}

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

json assertions_json(const std::vector<Assertion>& asserts) {
  json j = json::object();
  for (const auto& a : asserts) j[a.name] = {{"pass", a.pass}, {"detail", a.detail}};
  return j;
}

void run_pipeline_experiment(const ExperimentConfig& c, const std::string& out_dir,
                             std::vector<Assertion>& asserts) {
  std::ostringstream csv;
  csv << "seed,variant,stage,rho,sup_out,sup_grad,sup_out_teacher,sup_grad_teacher,theta_step,"
         "eps_tune,train_loss,test_loss,test_accuracy\n";
  int wins = 0;
  bool bound_ok = true;
  for (int e = 0; e < c.pipeline_seeds; ++e) {
    const ExperimentSetup s = c.setup.replica(e);
    const Dataset data = gen_task(s.dim, s.classes, s.samples, s.noise, s.task_seed);
    const TeacherResult teacher = train_teacher(data, s.arch, s.teacher);
    const auto probe = make_probe(data, s.probe_size, s.probe_seed);

    PruneSchedule staged = c.schedule;
    staged.seed = mix_seed(c.schedule.seed, 0x50 + e);
    PruneSchedule oneshot = staged;
    oneshot.n_stages = 1;

    const PipelineResult multi = run_pipeline(data, teacher.net, probe, staged, c.spec, Temperature(c.temp));
    const PipelineResult one = run_pipeline(data, teacher.net, probe, oneshot, c.spec, Temperature(c.temp));

    double max_stage_dev = 0;
    for (const auto& m : multi.stages) max_stage_dev = std::max(max_stage_dev, m.sup_out);
    if (max_stage_dev < one.stages[0].sup_out) ++wins;
    bound_ok = bound_ok && multi.lipschitz_bound_ok && one.lipschitz_bound_ok;

    auto emit = [&](const char* variant, const PipelineResult& r) {
      for (const auto& m : r.stages)
        csv << e << ',' << variant << ',' << m.stage << ',' << format_number(m.rho) << ','
            << format_number(m.sup_out) << ',' << format_number(m.sup_grad) << ','
            << format_number(m.sup_out_teacher) << ',' << format_number(m.sup_grad_teacher) << ','
            << format_number(m.theta_step) << ',' << format_number(m.eps_tune) << ','
            << format_number(m.train_loss) << ',' << format_number(m.test_loss) << ','
            << format_number(m.test_accuracy) << '\n';
    };
    emit("staged", multi);
    emit("oneshot", one);
  }
  atomic_write(out_dir + "/stages.csv", csv.str());
  asserts.push_back({"pipeline_staged_beats_oneshot", wins >= c.pipeline_min_wins,
                     std::to_string(wins) + "/" + std::to_string(c.pipeline_seeds) + " seeds"});
  asserts.push_back({"pipeline_lipschitz_bound", bound_ok, "sup_out <= L_hat * ||dtheta|| per stage"});
}

void run_biasvar_experiment(const ExperimentConfig& c, const std::string& out_dir,
                            std::vector<Assertion>& asserts) {
  std::ostringstream csv;
  csv << "seed,operator,T,rho,m,bias2,variance,total,sigma2,identity_rel_err\n";
  int var_wins = 0;
  bool identity_ok = true;
  for (int e = 0; e < c.biasvar_seeds; ++e) {
    const ExperimentSetup s = c.setup.replica(0x2000 + e);
    const Dataset data = gen_task(s.dim, s.classes, s.samples, s.noise, s.task_seed);
    const TeacherResult teacher = train_teacher(data, s.arch, s.teacher);
    const auto reports = bias_variance(data, teacher.net, c.spec, Temperature(c.temp),
                                       c.biasvar_students, c.biasvar_levels, c.biasvar_epochs,
                                       c.schedule.eta, c.schedule.batch,
                                       mix_seed(c.schedule.seed, 0x90 + e), c.biasvar_subsample);
    for (const auto& r : reports) {
      identity_ok = identity_ok && r.identity_rel_err < 1e-6;
      csv << e << ',' << r.family << ',' << format_number(r.temp) << ',' << format_number(r.rho)
          << ',' << r.m << ',' << format_number(r.bias2) << ',' << format_number(r.variance) << ','
          << format_number(r.total) << ',' << format_number(r.sigma2) << ','
          << format_number(r.identity_rel_err) << '\n';
    }
    if (reports.back().variance < reports.front().variance) ++var_wins;
  }
  atomic_write(out_dir + "/biasvar.csv", csv.str());
  asserts.push_back({"biasvar_identity", identity_ok, "|total - bias2 - variance| / total < 1e-6"});
  asserts.push_back({"biasvar_variance_reduction", var_wins >= c.biasvar_min_wins,
                     std::to_string(var_wins) + "/" + std::to_string(c.biasvar_seeds) + " seeds"});
}

void run_sweep_experiment(const ExperimentConfig& c, const std::string& out_dir,
                          std::vector<Assertion>& asserts) {
  ExperimentSetup setup = c.setup;
  PruneSchedule sched = c.schedule;
  if (!c.sweep_arch.empty()) {
    if (c.sweep_arch.front() != setup.dim || c.sweep_arch.back() != setup.classes)
      fail(errc::bad_config, "sweep arch endpoints must match task dim and classes");
    setup.arch = c.sweep_arch;
  }
  if (c.sweep_rho_target > 0.0) sched.rho_target = c.sweep_rho_target;
  const ConvergenceReport rep =
      convergence_sweep(setup, sched, c.spec, Temperature(c.temp), c.sweep_n_list,
                        c.sweep_total_epochs, c.sweep_seeds);
  atomic_write(out_dir + "/convergence.csv", convergence_csv(rep));
  std::ostringstream detail;
  detail << "a=" << format_number(rep.fit_a, 6) << " b=" << format_number(rep.fit_b, 6) << " medians=[";
  for (std::size_t i = 0; i < rep.median_residual.size(); ++i)
    detail << (i ? " " : "") << format_number(rep.median_residual[i], 6);
  detail << "]";
  if (c.sweep_assert_trend) {
    asserts.push_back({"sweep_multi_stage_improves", rep.improves_over_one_shot, detail.str()});
    asserts.push_back({"sweep_fit_a_positive", rep.fit_a > 0.0, detail.str()});
  } else {
    std::cerr << "[info] sweep trend (not gated): " << detail.str() << "\n";
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, bool do_pipeline,
                 bool do_biasvar, bool do_sweep) {
  const ExperimentConfig c = parse_config(config_path);
  std::vector<Assertion> asserts;
  if (do_pipeline && c.pipeline_enabled) run_pipeline_experiment(c, out_dir, asserts);
  if (do_biasvar && c.biasvar_enabled) run_biasvar_experiment(c, out_dir, asserts);
  if (do_sweep && c.sweep_enabled) run_sweep_experiment(c, out_dir, asserts);

  bool all = true;
  for (const auto& a : asserts) {
    all = all && a.pass;
    std::cerr << (a.pass ? "[pass] " : "[FAIL] ") << a.name << ": " << a.detail << "\n";
  }
  json summary{{"assertions", assertions_json(asserts)}, {"all_pass", all}};
  atomic_write(out_dir + "/summary.json", summary.dump(2) + "\n");
  return all ? kExitOk : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probability-domain softening toolkit"};
  app.require_subcommand(1);

  SoftenArgs soften_args;
  auto* soften_cmd = app.add_subcommand("soften", "soften JSONL distributions");
  soften_cmd->add_option("--op", soften_args.op, "operator family");
  soften_cmd->add_option("--temp", soften_args.temp, "temperature")->required();
  soften_cmd->add_option("--in", soften_args.in_path, "input JSONL")->required();
  soften_cmd->add_option("--out", soften_args.out_path, "output JSONL")->required();
  soften_cmd->add_option("--digits", soften_args.digits, "decimal places (0 = full precision)");

  CompleteArgs complete_args;
  auto* complete_cmd = app.add_subcommand("complete", "complete top-k truncated distributions");
  complete_cmd->add_option("--strategy", complete_args.strategy, "renorm|maxent|zipf");
  complete_cmd->add_option("--vocab", complete_args.vocab, "vocabulary size fallback");
  complete_cmd->add_option("--in", complete_args.in_path, "input JSONL")->required();
  complete_cmd->add_option("--out", complete_args.out_path, "output JSONL")->required();
  complete_cmd->add_option("--op", complete_args.op, "optionally soften with this operator");
  complete_cmd->add_option("--temp", complete_args.temp, "temperature for --op");
  complete_cmd->add_option("--digits", complete_args.digits, "decimal places (0 = full precision)");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "run the axiom certification suite");
  verify_cmd->add_option("--op", verify_args.op, "operator family")->required();
  verify_cmd->add_option("--samples", verify_args.samples, "samples per check");
  verify_cmd->add_option("--seed", verify_args.seed, "base seed");
  verify_cmd->add_option("--v", verify_args.vocab, "sample dimension");
  verify_cmd->add_option("--concentration", verify_args.concentration, "Dirichlet concentration");
  verify_cmd->add_option("--out", verify_args.out_path, "report JSON path (default stdout)");

  EquivArgs equiv_args;
  auto* equiv_cmd = app.add_subcommand("equiv", "KD-equivalence check for two operators");
  equiv_cmd->add_option("--op-a", equiv_args.op_a, "first operator")->required();
  equiv_cmd->add_option("--op-b", equiv_args.op_b, "second operator")->required();
  equiv_cmd->add_option("--class", equiv_args.cls, "grid|unrestricted");
  equiv_cmd->add_option("--v", equiv_args.vocab, "vocabulary size");
  equiv_cmd->add_option("--g", equiv_args.grid, "grid resolution");
  equiv_cmd->add_option("--temp", equiv_args.temp, "temperature");
  equiv_cmd->add_option("--teachers", equiv_args.teachers_path, "teacher JSONL (default: sampled)");
  equiv_cmd->add_option("--samples", equiv_args.samples, "sampled teacher count");
  equiv_cmd->add_option("--seed", equiv_args.seed, "teacher sampling seed");
  equiv_cmd->add_option("--concentration", equiv_args.concentration, "teacher Dirichlet concentration");
  equiv_cmd->add_option("--out", equiv_args.out_path, "verdict JSON path (default stdout)");

  std::string config_path, out_dir;
  auto add_experiment_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "run the configured experiments");
  add_experiment_options(simulate_cmd);
  auto* biasvar_cmd = app.add_subcommand("biasvar", "run only the bias-variance experiment");
  add_experiment_options(biasvar_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "run only the convergence sweep");
  add_experiment_options(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (soften_cmd->parsed()) return cmd_soften(soften_args);
    if (complete_cmd->parsed()) return cmd_complete(complete_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_args);
    if (equiv_cmd->parsed()) return cmd_equiv(equiv_args);
    if (simulate_cmd->parsed()) return cmd_simulate(config_path, out_dir, true, true, true);
    if (biasvar_cmd->parsed()) return cmd_simulate(config_path, out_dir, false, true, false);
    if (sweep_cmd->parsed()) return cmd_simulate(config_path, out_dir, false, false, true);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
