#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msq/lemma_lab.hpp"
#include "msq/rigidity.hpp"

namespace msq {

struct SweepConfig {
  std::vector<int> n_values = {1};
  std::vector<double> eps_values = {1e-3};
  std::vector<std::uint64_t> seeds = {1};
  PerturbKind kind = PerturbKind::measurement_rotate;
  std::set<std::string> checks = {"relations", "consistency", "fidelity"};
  std::string out_dir;
  long sampled_budget = 0;  // 0: full sums where feasible

  void validate() const;  // throws FeasibilityError / ContractError
};

SweepConfig sweep_config_from_json(const std::string& text);
std::string sweep_config_to_json(const SweepConfig& config);

struct SweepCell {
  int n = 1;
  double eps_target = 0.0;
  double eps_measured = 0.0;
  std::uint64_t seed = 0;
  std::string kind;
  // fixed, ordered quantity table; missing checks leave entries absent
  std::vector<std::pair<std::string, double>> quantities;
  std::string failure;  // empty on success

  std::optional<double> quantity(const std::string& name) const;
};

struct FitResult {
  std::string quantity;
  int n = 0;
  bool fitted = false;
  std::string skip_reason;
  double exponent = 0.0;
  double log10_constant = 0.0;
  double r2 = 0.0;
  int points = 0;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepCell> cells;
  std::vector<FitResult> fits;
  std::vector<LemmaOutcome> lemmas;  // populated when the "lemmas" check is enabled
};

/// Column order of the per-cell quantity table.
const std::vector<std::string>& sweep_quantity_names();

/// Quantities whose deficit-vs-eps exponent is fitted.
const std::vector<std::string>& fitted_quantity_names();

SweepResult run_sweep(const SweepConfig& config);

/// RFC 4180 CSV (CRLF line endings), rows sorted by (n, eps, seed).
std::string sweep_csv(const SweepResult& result);
std::string sweep_json(const SweepResult& result);

/// Log-log least squares of value vs eps; requires >= 3 distinct eps
/// points with values above the numerical floor.
FitResult fit_power_law(const std::string& quantity, int n,
                        const std::vector<std::pair<double, double>>& points);

struct IdealCheckResult {
  int n = 1;
  double win_prob = 0.0;
  double max_residual = 0.0;
  bool pass = false;
  RigidityReport report;
};

/// Builds the ideal strategy, runs every residual suite (and the fidelity
/// computation; sampled labels at n = 3), asserting everything <= 1e-8.
IdealCheckResult run_ideal_check(int n, long sampled_budget = 64);

std::string ideal_check_json(const IdealCheckResult& result);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace msq
