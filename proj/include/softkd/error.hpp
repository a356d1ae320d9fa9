#pragma once

#include <stdexcept>
#include <string>

namespace softkd {

// Error taxonomy shared by every module. The code is what callers dispatch
// on; the message carries context for humans.
enum class errc {
  // simplex validation
  negative_mass,
  bad_sum,
  too_short,
  // divergences
  support_mismatch,
  dim_mismatch,
  // sampling
  bad_concentration,
  // operators
  bad_temperature,
  overflow,
  target_out_of_range,
  no_convergence,
  // top-k completion
  bad_truncation,
  infeasible_topk,
  too_few_points,
  // equivalence checking
  grid_too_large,
  // simulator
  bad_params,
  bad_rho,
  diverged,
  // cli
  bad_config,
  io_failure,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::negative_mass: return "NegativeMass";
    case errc::bad_sum: return "BadSum";
    case errc::too_short: return "TooShort";
    case errc::support_mismatch: return "SupportMismatch";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::bad_concentration: return "BadConcentration";
    case errc::bad_temperature: return "BadTemperature";
    case errc::overflow: return "Overflow";
    case errc::target_out_of_range: return "TargetOutOfRange";
    case errc::no_convergence: return "NoConvergence";
    case errc::bad_truncation: return "BadTruncation";
    case errc::infeasible_topk: return "InfeasibleTopK";
    case errc::too_few_points: return "TooFewPoints";
    case errc::grid_too_large: return "GridTooLarge";
    case errc::bad_params: return "BadParams";
    case errc::bad_rho: return "BadRho";
    case errc::diverged: return "Diverged";
    case errc::bad_config: return "BadConfig";
    case errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace softkd
