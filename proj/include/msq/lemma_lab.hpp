#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "msq/tensor_core.hpp"

namespace msq {

/// Randomized checks for the state-dependent-distance lemmas.  Hypothesis
/// quantities are always measured from the generated instance, never
/// assumed, so every conclusion inequality must hold; a failure indicates
/// an implementation bug.

struct TriangleCheck {
  bool pass = false;
  double slack_tri = 0.0;   // d(A,B) + d(B,C) - d(A,C)
  double slack_tri2 = 0.0;  // d(DA,DB) + ||D|| d(B,C) - d(DA,DC)
};
TriangleCheck check_triangle(std::uint64_t seed, long dim = 8);

struct CoherentAverageCheck {
  bool pass = false;
  double defect = 0.0;  // |d_{psi'}(~A,~B)^2 - E_i d_psi(A_i,B_i)^2|
};
CoherentAverageCheck check_coherent_average(std::uint64_t seed, long dim = 4, int count = 2);

struct SaveEpsCheck {
  bool pass = false;
  double delta = 0.0;
  double slack = 0.0;  // <TT'> - (1 - 4 delta)
};
SaveEpsCheck check_save_eps(std::uint64_t seed, long dim = 8);

struct SwitchLemmasCheck {
  bool pass = false;
  double slack_con2 = 0.0;
  double slack_string = 0.0;
  double slack_switch3 = 0.0;
  double slack_switchmany = 0.0;
  double slack_riffle = 0.0;
};
SwitchLemmasCheck check_switch_lemmas(std::uint64_t seed, long dim = 4, int k = 3);

struct LemmaOutcome {
  std::string lemma;
  long trials = 0;
  long failures = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> failing_seeds;
};

LemmaOutcome run_lemma(const std::string& name, long seed_count, std::uint64_t seed_base = 1);
std::vector<LemmaOutcome> run_all_lemmas(long seed_count, std::uint64_t seed_base = 1);
std::vector<std::string> lemma_names();

/// Per-lemma JSON summary: {lemma, trials, failures, min_slack}.
std::string lemma_outcomes_json(const std::vector<LemmaOutcome>& outcomes);

}  // namespace msq
