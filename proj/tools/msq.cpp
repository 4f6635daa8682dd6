#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "msq/game.hpp"
#include "msq/lemma_lab.hpp"
#include "msq/sweep.hpp"

namespace fs = std::filesystem;
using namespace msq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;

std::string default_out_dir() {
  const char* env = std::getenv("MSQ_OUT_DIR");
  return env ? env : ".";
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + name);
  f << content;
}

int cmd_ideal_check(int n, long budget, const std::string& out_dir) {
  const IdealCheckResult res = run_ideal_check(n, budget);
  write_file(out_dir, "ideal-check-n" + std::to_string(n) + ".json", ideal_check_json(res));
  std::cout << "ideal-check n=" << n << " win_prob=" << format_double(res.win_prob)
            << " max_residual=" << format_double(res.max_residual)
            << " fidelity_bound=" << format_double(res.report.fidelity_bound)
            << (res.pass ? " PASS" : " FAIL") << "\n";
  return res.pass ? kExitOk : kExitAssertion;
}

int cmd_classical_value(bool verbose, bool machine) {
  const auto res = game::classical_value_single();
  if (machine) {
    nlohmann::ordered_json j;
    j["schema"] = "msq.classical-value/1";
    j["num"] = res.value.num;
    j["den"] = res.value.den;
    if (verbose) j["optimal_pairs"] = res.optimal_pairs;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << res.value.num << "/" << res.value.den << "\n";
    if (verbose) {
      std::cout << "optimal deterministic strategy pairs: " << res.optimal_pairs << " of "
                << res.total_pairs << "\n";
    }
  }
  return kExitOk;
}

int cmd_sweep(const SweepConfig& config) {
  const SweepResult result = run_sweep(config);
  const std::string dir = config.out_dir.empty() ? default_out_dir() : config.out_dir;
  write_file(dir, "sweep.csv", sweep_csv(result));
  write_file(dir, "sweep.json", sweep_json(result));
  long failures = 0;
  for (const auto& cell : result.cells) {
    if (!cell.failure.empty()) {
      ++failures;
      std::cout << "cell n=" << cell.n << " eps=" << format_double(cell.eps_target)
                << " seed=" << cell.seed << " FAILED: " << cell.failure << "\n";
    }
  }
  for (const auto& f : result.fits) {
    std::cout << "fit " << f.quantity << " n=" << f.n;
    if (f.fitted) {
      std::cout << " exponent=" << format_double(f.exponent) << " r2=" << format_double(f.r2)
                << " points=" << f.points;
    } else {
      std::cout << " skipped (" << f.skip_reason << ")";
    }
    std::cout << "\n";
  }
  std::cout << "sweep: " << result.cells.size() << " cells, " << failures << " failures, outputs in "
            << dir << "\n";
  return failures == 0 ? kExitOk : kExitAssertion;
}

int cmd_lemma_tests(long seed_count, const std::string& lemma, std::uint64_t replay_seed,
                    bool has_replay, const std::string& out_dir) {
  if (has_replay) {
    if (lemma.empty()) throw ContractError("--seed replay requires --lemma");
    const auto outcome = run_lemma(lemma, 1, replay_seed);
    std::cout << "lemma " << lemma << " seed " << replay_seed
              << " min_slack=" << format_double(outcome.min_slack)
              << (outcome.failures == 0 ? " PASS" : " FAIL") << "\n";
    return outcome.failures == 0 ? kExitOk : kExitAssertion;
  }
  std::vector<LemmaOutcome> outcomes;
  if (lemma.empty()) {
    outcomes = run_all_lemmas(seed_count);
  } else {
    outcomes.push_back(run_lemma(lemma, seed_count));
  }
  write_file(out_dir, "lemma-summary.json", lemma_outcomes_json(outcomes));
  long failures = 0;
  for (const auto& o : outcomes) {
    failures += o.failures;
    std::cout << "lemma " << o.lemma << " trials=" << o.trials << " failures=" << o.failures
              << " min_slack=" << format_double(o.min_slack) << "\n";
    for (auto s : o.failing_seeds) std::cout << "  failing seed " << s << "\n";
  }
  return failures == 0 ? kExitOk : kExitAssertion;
}

int cmd_spectrum(int n, const std::string& out_dir) {
  const MagicSpectrumReport rep = magic_spectrum(n);
  const ImplicationAudit audit = n == 1 ? magic_implication_audit(1000, 12345) : ImplicationAudit{};
  nlohmann::ordered_json j;
  j["schema"] = "msq.spectrum/1";
  j["n"] = rep.n;
  j["top_eigenvalue"] = rep.top_eigenvalue;
  j["top_multiplicity"] = rep.top_multiplicity;
  j["epr_overlap"] = rep.epr_overlap;
  j["second_largest_abs"] = rep.second_largest_abs;
  j["dominance_min_eig"] = rep.dominance_min_eig;
  if (n == 1) {
    j["implication_audit"] = {{"trials", audit.trials},
                              {"failures", audit.failures},
                              {"min_slack", audit.min_slack}};
  }
  write_file(out_dir, "spectrum-n" + std::to_string(n) + ".json", j.dump(2));
  const bool pass = std::abs(rep.top_eigenvalue - 1.0) <= 1e-10 && rep.top_multiplicity == 1 &&
                    rep.epr_overlap >= 1.0 - 1e-10 &&
                    rep.second_largest_abs <= 5.0 / 9.0 + 1e-10 &&
                    rep.dominance_min_eig >= -1e-10 && audit.failures == 0;
  std::cout << "spectrum n=" << n << " top=" << format_double(rep.top_eigenvalue)
            << " mult=" << rep.top_multiplicity
            << " second=" << format_double(rep.second_largest_abs)
            << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? kExitOk : kExitAssertion;
}

int cmd_appendix_b(double eps, std::uint64_t seed, const std::string& kind,
                   const std::string& out_dir) {
  PureStrategy s = ideal_single_round();
  if (eps > 0) s = perturb(s, eps, seed, perturb_kind_from_name(kind));
  const AppendixBReport rep = appendix_b_audit(s);
  nlohmann::ordered_json j;
  j["schema"] = "msq.appendix-b/1";
  j["eps"] = rep.eps;
  j["seed"] = seed;
  j["kind"] = kind;
  nlohmann::ordered_json wins = nlohmann::ordered_json::array();
  bool all_pass = rep.chain_dominates;
  for (const auto& w : rep.wins) {
    wins.push_back({{"id", w.id}, {"expectation", w.expectation}, {"bound", w.bound},
                    {"pass", w.pass}});
    all_pass = all_pass && w.pass;
  }
  j["wins"] = std::move(wins);
  j["chain_steps"] = rep.chain_steps;
  j["chain_total"] = rep.chain_total;
  j["direct_residual"] = rep.direct_residual;
  j["chain_dominates"] = rep.chain_dominates;
  write_file(out_dir, "appendix-b.json", j.dump(2));
  std::cout << "appendix-b eps=" << format_double(rep.eps)
            << " chain_total=" << format_double(rep.chain_total)
            << " direct=" << format_double(rep.direct_residual)
            << (all_pass ? " PASS" : " FAIL") << "\n";
  return all_pass ? kExitOk : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for the parallel-repeated Magic Square game"};
  app.require_subcommand(1);

  // ideal-check
  auto* ideal = app.add_subcommand("ideal-check", "residual suites on the ideal strategy");
  int ideal_n = 1;
  long ideal_budget = 64;
  std::string ideal_out = default_out_dir();
  ideal->add_option("--n", ideal_n, "number of rounds");
  ideal->add_option("--sampled-budget", ideal_budget, "fidelity sampling budget for n = 3");
  ideal->add_option("--out", ideal_out, "output directory");

  // classical-value
  auto* classical = app.add_subcommand("classical-value", "exact classical game value");
  bool cls_verbose = false, cls_machine = false;
  classical->add_flag("--verbose", cls_verbose, "print the count of optimal strategies");
  classical->add_flag("--machine", cls_machine, "machine-readable JSON output");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "perturbation sweep with scaling fits");
  std::string sweep_config_path;
  std::vector<int> sweep_n = {1, 2};
  std::vector<double> sweep_eps = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_kind = "measurement-rotate";
  std::string sweep_out = default_out_dir();
  long sweep_budget = 0;
  std::vector<std::string> sweep_checks;
  sweep->add_option("--config", sweep_config_path, "JSON config file (flags override)");
  sweep->add_option("--n", sweep_n, "round counts")->delimiter(',');
  sweep->add_option("--eps", sweep_eps, "target eps grid")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seed list")->delimiter(',');
  sweep->add_option("--kind", sweep_kind, "state-mix | measurement-rotate | both");
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--sampled-budget", sweep_budget, "isometry sampling budget (0 = full)");
  sweep->add_option("--checks", sweep_checks, "enabled checks")->delimiter(',');

  // lemma-tests
  auto* lemmas = app.add_subcommand("lemma-tests", "randomized state-dependent-distance lemma oracles");
  long lemma_seeds = 500;
  std::string lemma_name;
  std::uint64_t lemma_replay = 0;
  std::string lemma_out = default_out_dir();
  lemmas->add_option("--seeds", lemma_seeds, "number of seeded instances per lemma");
  lemmas->add_option("--lemma", lemma_name, "run a single lemma oracle");
  auto* replay_opt = lemmas->add_option("--seed", lemma_replay, "replay one instance seed");
  lemmas->add_option("--out", lemma_out, "output directory");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "certificate operator spectral report");
  int spec_n = 1;
  std::string spec_out = default_out_dir();
  spectrum->add_option("--n", spec_n, "number of rounds");
  spectrum->add_option("--out", spec_out, "output directory");

  // appendix-b
  auto* apxb = app.add_subcommand("appendix-b", "single-round consistency and anticommutation audit");
  double apx_eps = 1e-3;
  std::uint64_t apx_seed = 1;
  std::string apx_kind = "measurement-rotate";
  std::string apx_out = default_out_dir();
  apxb->add_option("--eps", apx_eps, "target eps for the perturbed strategy");
  apxb->add_option("--seed", apx_seed, "perturbation seed");
  apxb->add_option("--kind", apx_kind, "perturbation kind");
  apxb->add_option("--out", apx_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  // configuration stage: any error here is a configuration error (exit 2)
  SweepConfig sweep_config;
  PerturbKind apx_kind_value = PerturbKind::measurement_rotate;
  try {
    if (*sweep) {
      if (!sweep_config_path.empty()) {
        std::ifstream f(sweep_config_path);
        if (!f) throw FeasibilityError("cannot read config file " + sweep_config_path);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        sweep_config = sweep_config_from_json(text);
      }
      if (sweep->count("--n") || sweep_config_path.empty()) sweep_config.n_values = sweep_n;
      if (sweep->count("--eps") || sweep_config_path.empty()) sweep_config.eps_values = sweep_eps;
      if (sweep->count("--seeds")) {
        sweep_config.seeds = sweep_seeds;
      } else if (sweep_config_path.empty()) {
        sweep_config.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      }
      if (sweep->count("--kind") || sweep_config_path.empty())
        sweep_config.kind = perturb_kind_from_name(sweep_kind);
      if (sweep->count("--out") || sweep_config.out_dir.empty()) sweep_config.out_dir = sweep_out;
      if (sweep->count("--sampled-budget")) sweep_config.sampled_budget = sweep_budget;
      if (!sweep_checks.empty()) sweep_config.checks = {sweep_checks.begin(), sweep_checks.end()};
      sweep_config.validate();
    }
    if (*lemmas && !lemma_name.empty()) {
      const auto names = lemma_names();
      if (std::find(names.begin(), names.end(), lemma_name) == names.end())
        throw FeasibilityError("unknown lemma '" + lemma_name + "'");
    }
    if (*apxb) {
      apx_kind_value = perturb_kind_from_name(apx_kind);
      if (apx_eps < 0.0 || apx_eps > 0.2)
        throw FeasibilityError("appendix-b: eps must lie in [0, 0.2]");
    }
    if ((*ideal && (ideal_n < 1 || ideal_n > 3)) || (*spectrum && (spec_n < 1 || spec_n > 3)))
      throw FeasibilityError("n must be in [1, 3] (dense feasibility)");
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
  (void)apx_kind_value;

  try {
    if (*ideal) return cmd_ideal_check(ideal_n, ideal_budget, ideal_out);
    if (*classical) return cmd_classical_value(cls_verbose, cls_machine);
    if (*sweep) return cmd_sweep(sweep_config);
    if (*lemmas)
      return cmd_lemma_tests(lemma_seeds, lemma_name, lemma_replay, replay_opt->count() > 0,
                             lemma_out);
    if (*spectrum) return cmd_spectrum(spec_n, spec_out);
    if (*apxb) return cmd_appendix_b(apx_eps, apx_seed, apx_kind, apx_out);
  } catch (const FeasibilityError& e) {
    std::cerr << "feasibility error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAssertion;
  }
  return kExitConfig;
}
