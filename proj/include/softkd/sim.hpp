#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "softkd/data.hpp"
#include "softkd/error.hpp"
#include "softkd/net.hpp"
#include "softkd/ops.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 60;
  double eta = 0.05;
  int batch = 32;
  std::uint64_t seed = 11;
};

struct PruneSchedule {
  int n_stages = 8;
  double rho_target = 0.8;
  int epochs_per_stage = 12;
  double eta = 0.05;
  int batch = 32;
  std::uint64_t seed = 21;

  void validate() const {
    if (n_stages < 1) fail(errc::bad_config, "n_stages must be >= 1");
    if (!(rho_target > 0.0) || rho_target >= 1.0) fail(errc::bad_config, "rho_target must lie in (0, 1)");
    if (epochs_per_stage < 0 || batch < 1 || !(eta > 0.0)) fail(errc::bad_config, "bad schedule parameters");
  }
};

// Task, architecture and teacher budget for one experiment instance.
struct ExperimentSetup {
  int dim = 8;
  int classes = 5;
  int samples = 4000;  // split half train, half test
  double noise = 0.0;
  std::uint64_t task_seed = 1;
  std::vector<int> arch = {8, 64, 64, 5};
  TrainConfig teacher;
  int probe_size = 512;
  std::uint64_t probe_seed = 31;

  // Derives an independent replica of the whole setup for experiment seed e.
  ExperimentSetup replica(std::uint64_t e) const {
    ExperimentSetup s = *this;
    s.task_seed = mix_seed(task_seed, 0x100 + e);
    s.teacher.seed = mix_seed(teacher.seed, 0x200 + e);
    s.probe_seed = mix_seed(probe_seed, 0x300 + e);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TeacherResult {
  TinyNet net;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

namespace detail {

inline double eval_ce(const TinyNet& net, const Dataset& data, const std::vector<std::size_t>& idx,
                      const std::vector<std::vector<double>>& targets) {
  NetWorkspace ws;
  ws.resize(net);
  double loss = 0.0;
  for (std::size_t i : idx) {
    const auto& probs = forward_raw(net, data.inputs[i], ws);
    const auto& q = targets[i];
    for (std::size_t c = 0; c < q.size(); ++c)
      if (q[c] > 0.0) loss -= q[c] * std::log(std::max(probs[c], 1e-300));
  }
  return loss / static_cast<double>(idx.size());
}

inline double eval_accuracy(const TinyNet& net, const Dataset& data, const std::vector<std::size_t>& idx) {
  NetWorkspace ws;
  ws.resize(net);
  int hits = 0;
  for (std::size_t i : idx) {
    const auto& probs = forward_raw(net, data.inputs[i], ws);
    const auto arg = std::distance(probs.begin(), std::max_element(probs.begin(), probs.end()));
    if (static_cast<int>(arg) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

struct SgdResult {
  double final_epoch_loss = 0.0;  // mean train loss over the last epoch
  double grad_norm_sum = 0.0;     // sum of averaged-batch gradient norms
};

// Mini-batch SGD on cross-entropy against per-index targets. Deterministic
// per (net, seed); throws Diverged on a non-finite epoch loss.
inline SgdResult sgd_train(TinyNet& net, const Dataset& data,
                           const std::vector<std::vector<double>>& targets, int epochs, double eta,
                           int batch, std::uint64_t seed) {
  NetWorkspace ws;
  ws.resize(net);
  NetGrad grad;
  grad.resize_like(net);
  std::vector<std::size_t> order = data.train_idx;
  SgdResult res;
  for (int e = 0; e < epochs; ++e) {
    std::mt19937_64 rng(mix_seed(seed, 0xe90c + static_cast<std::uint64_t>(e)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t bsz = std::min<std::size_t>(batch, order.size() - start);
      grad.zero();
      for (std::size_t k = 0; k < bsz; ++k) {
        const std::size_t i = order[start + k];
        epoch_loss += backward_soft_ce(net, data.inputs[i], targets[i], ws, grad);
      }
      res.grad_norm_sum += grad.l2_norm() / static_cast<double>(bsz);
      sgd_step(net, grad, eta, static_cast<int>(bsz));
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) fail(errc::diverged, "training loss became non-finite");
    if (e == epochs - 1) res.final_epoch_loss = epoch_loss;
  }
  return res;
}

inline std::vector<std::vector<double>> one_hot_targets(const Dataset& data) {
  std::vector<std::vector<double>> t(data.inputs.size(), std::vector<double>(data.classes, 0.0));
  for (std::size_t i = 0; i < data.inputs.size(); ++i) t[i][data.labels[i]] = 1.0;
  return t;
}

}  // namespace detail

// Dense teacher trained on hard labels.
inline TeacherResult train_teacher(const Dataset& data, const std::vector<int>& arch,
                                   const TrainConfig& cfg) {
  if (arch.front() != data.dim || arch.back() != data.classes)
    fail(errc::bad_params, "architecture endpoints must match task dim and classes");
  TeacherResult out{TinyNet::init(arch, cfg.seed)};
  const auto targets = detail::one_hot_targets(data);
  detail::sgd_train(out.net, data, targets, cfg.epochs, cfg.eta, cfg.batch, cfg.seed);
  out.train_loss = detail::eval_ce(out.net, data, data.train_idx, targets);
  out.test_loss = detail::eval_ce(out.net, data, data.test_idx, targets);
  out.test_accuracy = detail::eval_accuracy(out.net, data, data.test_idx);
  return out;
}

// Softened teacher outputs for every dataset index: the distillation targets.
inline std::vector<std::vector<double>> distill_targets(const TinyNet& teacher, const Dataset& data,
                                                        const OperatorSpec& spec, Temperature temp) {
  NetWorkspace ws;
  ws.resize(teacher);
  std::vector<std::vector<double>> t;
  t.reserve(data.inputs.size());
  for (const auto& x : data.inputs) {
    const ProbDist p = ProbDist::from_positive(forward_raw(teacher, x, ws));
    t.push_back(soften(spec, p, temp).values());
  }
  return t;
}

struct DistillResult {
  TinyNet net;
  double eps_tune = 0.0;       // final-epoch mean train loss (the measured tuning error)
  double initial_loss = 0.0;   // train loss before any update
  double grad_norm_sum = 0.0;  // sum of per-step averaged gradient norms
};

// One fine-tuning stage against precomputed targets.
inline DistillResult distill_stage_pre(const TinyNet& student,
                                       const std::vector<std::vector<double>>& targets,
                                       const Dataset& data, int epochs, double eta, int batch,
                                       std::uint64_t seed) {
  DistillResult out{student};
  out.initial_loss = detail::eval_ce(out.net, data, data.train_idx, targets);
  if (epochs == 0) {
    out.eps_tune = out.initial_loss;
    return out;
  }
  const auto res = detail::sgd_train(out.net, data, targets, epochs, eta, batch, seed);
  out.eps_tune = res.final_epoch_loss;
  out.grad_norm_sum = res.grad_norm_sum;
  return out;
}

// Spec-facing variant: softens the teacher itself.
inline DistillResult distill_stage(const TinyNet& student, const TinyNet& teacher,
                                   const OperatorSpec& spec, Temperature temp, const Dataset& data,
                                   int epochs, double eta, int batch, std::uint64_t seed) {
  return distill_stage_pre(student, distill_targets(teacher, data, spec, temp), data, epochs, eta,
                           batch, seed);
}

// ---------------------------------------------------------------------------
// Function-space probes
// ---------------------------------------------------------------------------

// Probe inputs drawn from the task's cluster model.
inline std::vector<std::vector<double>> make_probe(const Dataset& data, int probe_size,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x9a0b));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> probe(probe_size, std::vector<double>(data.dim));
  for (int i = 0; i < probe_size; ++i) {
    const auto& c = data.centers[i % data.classes];
    for (int j = 0; j < data.dim; ++j) probe[i][j] = c[j] + normal(rng);
  }
  return probe;
}

struct ProbeDeviation {
  double sup_out = 0.0;   // max over probe of ||f_a(x) - f_b(x)||_inf
  double sup_grad = 0.0;  // max over probe of ||grad_x f_a - grad_x f_b||_inf (top class of a)
};

// Output and input-gradient deviations over a probe set. The gradient is of
// the top-class probability (class taken from the first net's output at x),
// by central finite differences with step 1e-4.
inline ProbeDeviation probe_deviation(const TinyNet& a, const TinyNet& b,
                                      const std::vector<std::vector<double>>& probe) {
  if (a.sizes != b.sizes) fail(errc::dim_mismatch, "nets must share an architecture");
  constexpr double h = 1e-4;
  NetWorkspace wa, wb;
  wa.resize(a);
  wb.resize(b);
  ProbeDeviation dev;
  std::vector<double> xp;
  for (const auto& x : probe) {
    const auto& pa = forward_raw(a, x, wa);
    const std::size_t cstar =
        std::distance(pa.begin(), std::max_element(pa.begin(), pa.end()));
    const auto& pb = forward_raw(b, x, wb);
    for (std::size_t c = 0; c < pa.size(); ++c)
      dev.sup_out = std::max(dev.sup_out, std::abs(pa[c] - pb[c]));
    xp = x;
    for (std::size_t d = 0; d < x.size(); ++d) {
      xp[d] = x[d] + h;
      const double ap = forward_raw(a, xp, wa)[cstar];
      const double bp = forward_raw(b, xp, wb)[cstar];
      xp[d] = x[d] - h;
      const double am = forward_raw(a, xp, wa)[cstar];
      const double bm = forward_raw(b, xp, wb)[cstar];
      xp[d] = x[d];
      const double ga = (ap - am) / (2.0 * h);
      const double gb = (bp - bm) / (2.0 * h);
      dev.sup_grad = std::max(dev.sup_grad, std::abs(ga - gb));
    }
  }
  return dev;
}

// Empirical Lipschitz constant of theta -> f_theta over the probe set, the
// max of two measurements. First, a local first-order envelope: the largest
// parameter-gradient norm max_{x,c} ||grad_theta f_c(x)||_2, which bounds
// every direction's instantaneous ratio, single coordinates included.
// Second, finite-step secant ratios ||f(theta + d) - f(theta)||_inf / ||d||_2
// over random directions: half isotropic over active weights and biases,
// half prune-shaped (a random subset of active weights pushed toward zero),
// since staged pruning moves exactly along such directions, with magnitudes
// sweeping a log range of the active-weight norm.
inline double empirical_lipschitz(const TinyNet& net, const std::vector<std::vector<double>>& probe,
                                  int draws, std::uint64_t seed) {
  NetWorkspace ws;
  ws.resize(net);
  std::vector<std::vector<double>> base;
  base.reserve(probe.size());
  for (const auto& x : probe) base.push_back(forward_raw(net, x, ws));

  double lhat = 0.0;
  {
    NetGrad grad;
    grad.resize_like(net);
    for (const auto& x : probe)
      for (int c = 0; c < net.output_dim(); ++c) {
        grad.zero();
        backward_output_prob(net, x, c, ws, grad);
        lhat = std::max(lhat, grad.l2_norm());
      }
  }

  struct Slot {
    std::size_t layer, idx;
    bool is_bias;
  };
  std::vector<Slot> active;
  double wnorm2 = 0.0;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    for (std::size_t i = 0; i < net.w[l].size(); ++i)
      if (net.mask[l][i]) {
        active.push_back({l, i, false});
        wnorm2 += net.w[l][i] * net.w[l][i];
      }
    for (std::size_t r = 0; r < net.b[l].size(); ++r) active.push_back({l, r, true});
  }
  const double wnorm = std::sqrt(std::max(wnorm2, 1e-12));
  const double mags[] = {1e-3, 1e-2, 0.1, 0.3};

  std::mt19937_64 rng(mix_seed(seed, 0x11b5));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> dir(active.size());
  for (int r = 0; r < draws; ++r) {
    double norm2 = 0.0;
    if (r % 2 == 0) {
      for (auto& d : dir) {
        d = normal(rng);
        norm2 += d * d;
      }
    } else {
      const double frac = 0.02 + 0.38 * unif(rng);
      std::fill(dir.begin(), dir.end(), 0.0);
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k].is_bias || unif(rng) >= frac) continue;
        dir[k] = -net.w[active[k].layer][active[k].idx];
        norm2 += dir[k] * dir[k];
      }
    }
    if (norm2 <= 0.0) continue;
    const double delta = mags[r % 4] * wnorm;
    const double scale = delta / std::sqrt(norm2);

    TinyNet pert = net;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (dir[k] == 0.0) continue;
      if (active[k].is_bias)
        pert.b[active[k].layer][active[k].idx] += scale * dir[k];
      else
        pert.w[active[k].layer][active[k].idx] += scale * dir[k];
    }
    double supd = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const auto& pp = forward_raw(pert, probe[i], ws);
      for (std::size_t c = 0; c < pp.size(); ++c)
        supd = std::max(supd, std::abs(pp[c] - base[i][c]));
    }
    lhat = std::max(lhat, supd / delta);
  }
  return lhat;
}

// ---------------------------------------------------------------------------
// Staged prune-and-distill pipeline
// ---------------------------------------------------------------------------

struct StageMetrics {
  int stage = 0;
  double rho = 0.0;
  double sup_out = 0.0;            // vs the pre-stage snapshot
  double sup_grad = 0.0;
  double sup_out_teacher = 0.0;    // vs the teacher
  double sup_grad_teacher = 0.0;
  double theta_step = 0.0;         // ||theta_k - theta_{k-1}||_2
  double eps_tune = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct PipelineResult {
  std::vector<StageMetrics> stages;
  double total_path_deviation = 0.0;  // sum of per-stage sup_out
  double lipschitz_hat = 0.0;         // running max over all measured base points
  bool lipschitz_bound_ok = true;     // sup_out_k <= L_hat * theta_step_k for every stage
  double teacher_test_loss = 0.0;     // teacher's own distillation loss on test
  double final_test_loss = 0.0;
};

// Starts the student as a copy of the teacher and alternates prune / distill
// along the linear sparsity schedule rho_k = k * rho_target / n.
inline PipelineResult run_pipeline(const Dataset& data, const TinyNet& teacher,
                                   const std::vector<std::vector<double>>& probe,
                                   const PruneSchedule& sched, const OperatorSpec& spec,
                                   Temperature temp, int lipschitz_draws = 64) {
  sched.validate();
  const auto targets = distill_targets(teacher, data, spec, temp);
  PipelineResult out;
  out.teacher_test_loss = detail::eval_ce(teacher, data, data.test_idx, targets);
  TinyNet student = teacher;
  out.lipschitz_hat = empirical_lipschitz(student, probe, lipschitz_draws, mix_seed(sched.seed, 0));
  for (int k = 1; k <= sched.n_stages; ++k) {
    const TinyNet prev = student;
    const double rho_k = sched.rho_target * static_cast<double>(k) / sched.n_stages;
    student = prune(student, rho_k);
    auto d = distill_stage_pre(student, targets, data, sched.epochs_per_stage, sched.eta,
                               sched.batch, mix_seed(sched.seed, 0xabc + k));
    student = std::move(d.net);
    if (!student.mask_invariant_holds()) fail(errc::bad_params, "mask invariant violated");

    StageMetrics m;
    m.stage = k;
    m.rho = student.sparsity();
    const auto dev_prev = probe_deviation(student, prev, probe);
    const auto dev_teacher = probe_deviation(student, teacher, probe);
    m.sup_out = dev_prev.sup_out;
    m.sup_grad = dev_prev.sup_grad;
    m.sup_out_teacher = dev_teacher.sup_out;
    m.sup_grad_teacher = dev_teacher.sup_grad;
    m.theta_step = theta_l2_distance(student, prev);
    m.eps_tune = d.eps_tune;
    m.train_loss = detail::eval_ce(student, data, data.train_idx, targets);
    m.test_loss = detail::eval_ce(student, data, data.test_idx, targets);
    m.test_accuracy = detail::eval_accuracy(student, data, data.test_idx);
    out.stages.push_back(m);
    out.total_path_deviation += m.sup_out;
    out.lipschitz_hat = std::max(
        out.lipschitz_hat, empirical_lipschitz(student, probe, lipschitz_draws, mix_seed(sched.seed, k)));
  }
  for (const auto& m : out.stages)
    if (m.sup_out > out.lipschitz_hat * m.theta_step) out.lipschitz_bound_ok = false;
  out.final_test_loss = out.stages.back().test_loss;
  return out;
}

// Convenience wrapper that builds task, teacher and probe from the setup.
inline PipelineResult run_pipeline(const ExperimentSetup& setup, const PruneSchedule& sched,
                                   const OperatorSpec& spec, Temperature temp) {
  const Dataset data = gen_task(setup.dim, setup.classes, setup.samples, setup.noise, setup.task_seed);
  const TeacherResult teacher = train_teacher(data, setup.arch, setup.teacher);
  const auto probe = make_probe(data, setup.probe_size, setup.probe_seed);
  return run_pipeline(data, teacher.net, probe, sched, spec, temp);
}

// ---------------------------------------------------------------------------
// Bias-variance harness
// ---------------------------------------------------------------------------

struct BiasVarReport {
  double rho = 0.0;
  int m = 0;  // number of students
  double bias2 = 0.0;
  double variance = 0.0;
  double total = 0.0;
  double sigma2 = 0.0;  // deterministic targets
  double identity_rel_err = 0.0;
  std::string family;
  double temp = 1.0;
};

// Trains M students per sparsity level and decomposes the mean squared loss
// against the deterministic softened targets on the test set. The training
// randomness has both components the decomposition averages over: random
// initialization, and sampling (each student fits its own bootstrap draw of
// the training split). The sparsity constraint is the teacher's magnitude
// mask, the same fixed subspace the staged pipeline moves in; per-student
// masks would confound capacity with mask diversity.
inline std::vector<BiasVarReport> bias_variance(const Dataset& data, const TinyNet& teacher,
                                                const OperatorSpec& spec, Temperature temp, int m,
                                                const std::vector<double>& sparsity_levels,
                                                int epochs, double eta, int batch,
                                                std::uint64_t seed, int train_subsample = 150) {
  if (m < 2) fail(errc::bad_params, "need at least 2 students");
  if (train_subsample < batch) fail(errc::bad_params, "subsample smaller than one batch");
  const auto targets = distill_targets(teacher, data, spec, temp);
  const auto& test = data.test_idx;
  const int C = teacher.output_dim();

  std::vector<BiasVarReport> reports;
  for (double rho : sparsity_levels) {
    const TinyNet masked_teacher = prune(teacher, rho);
    // outputs[s][i*C + c]
    std::vector<std::vector<double>> outputs(m);
    for (int s = 0; s < m; ++s) {
      TinyNet student = TinyNet::init(teacher.sizes, mix_seed(seed, 0x51d + s));
      student.mask = masked_teacher.mask;
      for (std::size_t l = 0; l < student.w.size(); ++l)
        for (std::size_t i = 0; i < student.w[l].size(); ++i)
          if (!student.mask[l][i]) student.w[l][i] = 0.0;
      Dataset sub = data;
      std::mt19937_64 rng(mix_seed(seed, 0xb00 + s));
      sub.train_idx.resize(train_subsample);
      for (auto& i : sub.train_idx) i = data.train_idx[rng() % data.train_idx.size()];
      auto d = distill_stage_pre(student, targets, sub, epochs, eta, batch,
                                 mix_seed(seed, 0xd15 + s));
      NetWorkspace ws;
      ws.resize(d.net);
      outputs[s].reserve(test.size() * C);
      for (std::size_t i : test) {
        const auto& p = forward_raw(d.net, data.inputs[i], ws);
        outputs[s].insert(outputs[s].end(), p.begin(), p.end());
      }
    }
    BiasVarReport rep;
    rep.rho = rho;
    rep.m = m;
    rep.family = family_name(spec.family);
    rep.temp = temp.value();
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& q = targets[test[i]];
      for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (int s = 0; s < m; ++s) mean += outputs[s][i * C + c];
        mean /= static_cast<double>(m);
        rep.bias2 += (mean - q[c]) * (mean - q[c]);
        for (int s = 0; s < m; ++s) {
          const double dv = outputs[s][i * C + c] - mean;
          rep.variance += dv * dv / static_cast<double>(m);
          const double dt = outputs[s][i * C + c] - q[c];
          rep.total += dt * dt / static_cast<double>(m);
        }
      }
    }
    const double n = static_cast<double>(test.size());
    rep.bias2 /= n;
    rep.variance /= n;
    rep.total /= n;
    rep.identity_rel_err =
        std::abs(rep.total - (rep.bias2 + rep.variance + rep.sigma2)) / std::max(rep.total, 1e-12);
    reports.push_back(rep);
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Convergence sweep
// ---------------------------------------------------------------------------

struct SweepCell {
  int n_stages = 0;
  double final_loss = 0.0;
  double teacher_loss = 0.0;
  double residual = 0.0;
};

struct ConvergenceReport {
  std::vector<int> n_list;
  std::vector<std::vector<SweepCell>> cells;  // [seed][n index]
  std::vector<double> median_residual;        // per n
  double fit_a = 0.0;  // coefficient on 1/n
  double fit_b = 0.0;  // coefficient on n
  bool improves_over_one_shot = false;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Runs the pipeline for each n with a fixed total fine-tuning budget split
// evenly across stages, over several independent experiment replicas. Fits
// median residual against a/n + b*n and flags whether some n > 1 matches or
// beats one-shot.
inline ConvergenceReport convergence_sweep(const ExperimentSetup& setup, const PruneSchedule& sched,
                                           const OperatorSpec& spec, Temperature temp,
                                           const std::vector<int>& n_list, int total_epochs,
                                           int n_seeds) {
  if (n_list.empty() || n_list.front() != 1 || !std::is_sorted(n_list.begin(), n_list.end()))
    fail(errc::bad_config, "n_list must be ascending and start at 1");
  for (int n : n_list)
    if (total_epochs % n != 0)
      fail(errc::bad_config, "total epoch budget must be divisible by every n");

  ConvergenceReport rep;
  rep.n_list = n_list;
  for (int e = 0; e < n_seeds; ++e) {
    const ExperimentSetup s = setup.replica(static_cast<std::uint64_t>(e));
    const Dataset data = gen_task(s.dim, s.classes, s.samples, s.noise, s.task_seed);
    const TeacherResult teacher = train_teacher(data, s.arch, s.teacher);
    const auto probe = make_probe(data, s.probe_size, s.probe_seed);
    std::vector<SweepCell> row;
    for (int n : n_list) {
      PruneSchedule st = sched;
      st.n_stages = n;
      st.epochs_per_stage = total_epochs / n;
      st.seed = mix_seed(sched.seed, 0x77 + static_cast<std::uint64_t>(e));
      const PipelineResult pr = run_pipeline(data, teacher.net, probe, st, spec, temp,
                                             /*lipschitz_draws=*/16);
      row.push_back({n, pr.final_test_loss, pr.teacher_test_loss,
                     pr.final_test_loss - pr.teacher_test_loss});
    }
    rep.cells.push_back(std::move(row));
  }

  for (std::size_t j = 0; j < n_list.size(); ++j) {
    std::vector<double> r;
    for (const auto& row : rep.cells) r.push_back(row[j].residual);
    rep.median_residual.push_back(detail::median(std::move(r)));
  }

  // Least squares for r(n) ~ a/n + b*n.
  double suu = 0, suv = 0, svv = 0, sur = 0, svr = 0;
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    const double u = 1.0 / n_list[j], v = n_list[j], r = rep.median_residual[j];
    suu += u * u;
    suv += u * v;
    svv += v * v;
    sur += u * r;
    svr += v * r;
  }
  const double det = suu * svv - suv * suv;
  if (std::abs(det) > 1e-12) {
    rep.fit_a = (sur * svv - svr * suv) / det;
    rep.fit_b = (suu * svr - suv * sur) / det;
  }

  double best_multi = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < n_list.size(); ++j)
    best_multi = std::min(best_multi, rep.median_residual[j]);
  rep.improves_over_one_shot = !rep.median_residual.empty() && best_multi <= rep.median_residual.front();
  return rep;
}

}  // namespace softkd
