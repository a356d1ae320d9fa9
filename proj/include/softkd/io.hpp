#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "softkd/axioms.hpp"
#include "softkd/equiv.hpp"
#include "softkd/error.hpp"
#include "softkd/sim.hpp"
#include "softkd/simplex.hpp"
#include "softkd/topk.hpp"

namespace softkd {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

// digits <= 0 means full precision (17 significant digits, round-trip safe).
inline std::string format_number(double x, int digits = 0) {
  char buf[64];
  if (digits > 0)
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  else
    std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string format_prob_line(const ProbDist& p, int digits = 0) {
  std::string out = "{\"p\":[";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ',';
    out += format_number(p[i], digits);
  }
  out += "]}";
  return out;
}

// ---------------------------------------------------------------------------
// Atomic file output: temp file in the same directory, then rename.
// ---------------------------------------------------------------------------

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_failure, "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.good()) fail(errc::io_failure, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(errc::io_failure, "rename to " + path.string() + " failed: " + ec.message());
}

// ---------------------------------------------------------------------------
// JSONL distributions: one {"p": [...]} object per line, validated on load.
// ---------------------------------------------------------------------------

inline std::vector<ProbDist> read_dists_jsonl(std::istream& in) {
  std::vector<ProbDist> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(errc::bad_config, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("p") || !j["p"].is_array())
      fail(errc::bad_config, "line " + std::to_string(line_no) + ": expected {\"p\": [...]}");
    try {
      out.push_back(ProbDist::validate(j["p"].get<std::vector<double>>()));
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// Truncated distributions: {"V": int, "topk": [[id, prob], ...]} per line.
// A missing "V" falls back to default_vocab (the --vocab flag) when positive.
inline std::vector<TruncatedDist> read_truncated_jsonl(std::istream& in, int default_vocab = 0) {
  std::vector<TruncatedDist> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(errc::bad_config, "line " + std::to_string(line_no) + ": " + e.what());
    }
    const int vocab = j.contains("V") ? j["V"].get<int>() : default_vocab;
    if (vocab < 2) fail(errc::bad_config, "line " + std::to_string(line_no) + ": missing or bad V");
    if (!j.contains("topk") || !j["topk"].is_array())
      fail(errc::bad_config, "line " + std::to_string(line_no) + ": expected \"topk\" array");
    std::vector<TruncatedDist::Entry> entries;
    for (const auto& e : j["topk"]) {
      if (!e.is_array() || e.size() != 2)
        fail(errc::bad_config, "line " + std::to_string(line_no) + ": topk entries must be [id, prob]");
      entries.emplace_back(e[0].get<int>(), e[1].get<double>());
    }
    try {
      out.push_back(TruncatedDist::validate(std::move(entries), vocab));
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline json to_json(const CheckResult& r) {
  json j{{"name", r.name}, {"pass", r.pass}, {"samples", r.samples}, {"worst_margin", r.worst_margin}};
  if (r.counterexample) {
    const auto& c = *r.counterexample;
    j["counterexample"] = {{"p", c.p}, {"T", c.temp}, {"T_prime", c.temp_prime}, {"detail", c.detail}};
  } else {
    j["counterexample"] = nullptr;
  }
  return j;
}

inline json to_json(const AxiomReport& r) {
  return json{{"family", r.family},
              {"seed", r.seed},
              {"all_pass", r.all_pass},
              {"continuity_modulus", r.continuity_modulus},
              {"checks",
               {{"ranking", to_json(r.ranking)},
                {"continuity", to_json(r.continuity)},
                {"entropy_monotone", to_json(r.entropy_monotone)},
                {"identity", to_json(r.identity)},
                {"boundary", to_json(r.boundary)}}}};
}

inline json to_json(const EquivVerdict& v) {
  json j{{"equivalent", v.equivalent}};
  if (v.witness) {
    j["witness"] = {{"teacher", v.witness->teacher},
                    {"argmin_a", v.witness->argmin_a},
                    {"argmin_b", v.witness->argmin_b},
                    {"kl_a", v.witness->kl_a},
                    {"kl_b", v.witness->kl_b}};
  } else {
    j["witness"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV writers for the experiment engine
// ---------------------------------------------------------------------------

inline std::string stages_csv(const std::vector<StageMetrics>& stages) {
  std::ostringstream out;
  out << "stage,rho,sup_out,sup_grad,sup_out_teacher,sup_grad_teacher,theta_step,eps_tune,"
         "train_loss,test_loss,test_accuracy\n";
  for (const auto& m : stages) {
    out << m.stage << ',' << format_number(m.rho) << ',' << format_number(m.sup_out) << ','
        << format_number(m.sup_grad) << ',' << format_number(m.sup_out_teacher) << ','
        << format_number(m.sup_grad_teacher) << ',' << format_number(m.theta_step) << ','
        << format_number(m.eps_tune) << ',' << format_number(m.train_loss) << ','
        << format_number(m.test_loss) << ',' << format_number(m.test_accuracy) << '\n';
  }
  return out.str();
}

inline std::string biasvar_csv(const std::vector<BiasVarReport>& reports) {
  std::ostringstream out;
  out << "operator,T,rho,m,bias2,variance,total,sigma2,identity_rel_err\n";
  for (const auto& r : reports) {
    out << r.family << ',' << format_number(r.temp) << ',' << format_number(r.rho) << ',' << r.m
        << ',' << format_number(r.bias2) << ',' << format_number(r.variance) << ','
        << format_number(r.total) << ',' << format_number(r.sigma2) << ','
        << format_number(r.identity_rel_err) << '\n';
  }
  return out.str();
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
  std::ostringstream out;
  out << "seed,n_stages,final_loss,teacher_loss,residual\n";
  for (std::size_t e = 0; e < rep.cells.size(); ++e)
    for (const auto& c : rep.cells[e])
      out << e << ',' << c.n_stages << ',' << format_number(c.final_loss) << ','
          << format_number(c.teacher_loss) << ',' << format_number(c.residual) << '\n';
  return out.str();
}

}  // namespace softkd
