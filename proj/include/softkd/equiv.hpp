#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/ops.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// Student classes the distillation argmin is taken over. SimplexGrid is the
// set of distributions whose entries are multiples of 1/G; it admits an exact
// brute-force argmin with no optimizer ambiguity.
enum class StudentClassKind { unrestricted, simplex_grid };

struct StudentClassSpec {
  StudentClassKind kind = StudentClassKind::unrestricted;
  int vocab = 2;
  int grid_resolution = 0;  // G, simplex_grid only; grid step is 1/G
};

struct EquivWitness {
  std::vector<double> teacher;
  std::vector<double> argmin_a;
  std::vector<double> argmin_b;
  double kl_a = 0.0;
  double kl_b = 0.0;
};

struct EquivVerdict {
  bool equivalent = true;
  std::optional<EquivWitness> witness;
};

namespace detail {

inline double grid_point_count(int vocab, int g) {
  // C(G + V - 1, V - 1)
  double c = 1.0;
  for (int i = 1; i <= vocab - 1; ++i) c *= static_cast<double>(g + i) / static_cast<double>(i);
  return c;
}

// KL(s || target) where s has integer coordinates counts/G. Returns infinity
// when s puts mass where the target has none.
inline double grid_kl(const std::vector<int>& counts, int g, const ProbDist& target) {
  double d = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      const double s = static_cast<double>(counts[i]) / static_cast<double>(g);
      if (target[i] <= 0.0) return std::numeric_limits<double>::infinity();
      d += s * std::log(s / target[i]);
    }
  }
  return d;
}

// Exhaustive argmin of KL(s || target) over the grid, enumerated in
// lexicographic order of coordinates so exact ties resolve to the
// lexicographically smallest point.
inline std::vector<int> grid_argmin(const ProbDist& target, int g) {
  const int v = static_cast<int>(target.size());
  std::vector<int> counts(v, 0), best(v, 0);
  double best_kl = std::numeric_limits<double>::infinity();
  // Recursive enumeration of compositions of g into v parts.
  auto recurse = [&](auto&& self, int idx, int remaining) -> void {
    if (idx == v - 1) {
      counts[idx] = remaining;
      const double d = grid_kl(counts, g, target);
      if (d < best_kl) {
        best_kl = d;
        best = counts;
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[idx] = c;
      self(self, idx + 1, remaining - c);
    }
  };
  recurse(recurse, 0, g);
  if (!std::isfinite(best_kl)) fail(errc::support_mismatch, "no grid point lies in the target's support");
  return best;
}

inline std::vector<double> grid_to_values(const std::vector<int>& counts, int g) {
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(g);
  return out;
}

}  // namespace detail

// Checks whether two operators induce the same optimal student, teacher by
// teacher, over the given class. Unrestricted classes compare the targets
// themselves (the argmin of KL(s || q) over the whole simplex is q); grid
// classes compare exhaustive brute-force argmins.
inline EquivVerdict kd_equiv_check(const OperatorSpec& spec_a, const OperatorSpec& spec_b,
                                   const StudentClassSpec& cls, const std::vector<ProbDist>& teachers,
                                   Temperature temp) {
  if (cls.kind == StudentClassKind::simplex_grid) {
    if (cls.grid_resolution < 2) fail(errc::bad_params, "grid resolution must be >= 2");
    if (detail::grid_point_count(cls.vocab, cls.grid_resolution) > 1e7)
      fail(errc::grid_too_large, "grid enumeration exceeds 10^7 points");
  }
  EquivVerdict verdict;
  for (const ProbDist& teacher : teachers) {
    if (static_cast<int>(teacher.size()) != cls.vocab)
      fail(errc::dim_mismatch, "teacher size does not match the student class vocab");
    const ProbDist ta = soften(spec_a, teacher, temp);
    const ProbDist tb = soften(spec_b, teacher, temp);
    if (cls.kind == StudentClassKind::unrestricted) {
      if (linf_distance(ta, tb) > 1e-12) {
        verdict.equivalent = false;
        verdict.witness = EquivWitness{teacher.values(), ta.values(), tb.values(), 0.0, 0.0};
        return verdict;
      }
    } else {
      const auto ca = detail::grid_argmin(ta, cls.grid_resolution);
      const auto cb = detail::grid_argmin(tb, cls.grid_resolution);
      if (ca != cb) {
        verdict.equivalent = false;
        verdict.witness = EquivWitness{teacher.values(),
                                       detail::grid_to_values(ca, cls.grid_resolution),
                                       detail::grid_to_values(cb, cls.grid_resolution),
                                       detail::grid_kl(ca, cls.grid_resolution, ta),
                                       detail::grid_kl(cb, cls.grid_resolution, tb)};
        return verdict;
      }
    }
  }
  return verdict;
}

}  // namespace softkd
