#include "msq/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace msq {

namespace {

using nlohmann::ordered_json;

double max_residual_with_prefix(const std::vector<RelationEntry>& entries,
                                const std::string& prefix) {
  double m = 0.0;
  for (const auto& e : entries)
    if (e.id.rfind(prefix, 0) == 0) m = std::max(m, e.residual);
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void SweepConfig::validate() const {
  if (seeds.empty()) throw ContractError("sweep config: seed list must be nonempty");
  if (n_values.empty()) throw ContractError("sweep config: n list must be nonempty");
  for (int n : n_values) {
    if (n < 1 || n > 3) throw FeasibilityError("sweep config: n must be in [1, 3]");
  }
  for (double e : eps_values) {
    if (e < 0.0 || e > 0.2) throw ContractError("sweep config: eps must lie in [0, 0.2]");
  }
  static const std::set<std::string> known = {"relations", "consistency", "isometry",
                                              "fidelity", "appendixb", "lemmas"};
  for (const auto& c : checks) {
    if (!known.count(c)) throw ContractError("sweep config: unknown check '" + c + "'");
  }
}

SweepConfig sweep_config_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  if (j.at("schema").get<std::string>() != "msq.sweep-config/1")
    throw ContractError("unsupported sweep config schema");
  SweepConfig c;
  c.n_values = j.at("n_values").get<std::vector<int>>();
  c.eps_values = j.at("eps_values").get<std::vector<double>>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.kind = perturb_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("checks")) {
    c.checks.clear();
    for (const auto& x : j.at("checks")) c.checks.insert(x.get<std::string>());
  }
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("sampled_budget")) c.sampled_budget = j.at("sampled_budget").get<long>();
  c.validate();
  return c;
}

std::string sweep_config_to_json(const SweepConfig& config) {
  ordered_json j;
  j["schema"] = "msq.sweep-config/1";
  j["n_values"] = config.n_values;
  j["eps_values"] = config.eps_values;
  j["seeds"] = config.seeds;
  j["kind"] = perturb_kind_name(config.kind);
  j["checks"] = config.checks;
  j["out_dir"] = config.out_dir;
  j["sampled_budget"] = config.sampled_budget;
  return j.dump(2);
}

std::optional<double> SweepCell::quantity(const std::string& name) const {
  for (const auto& [k, v] : quantities)
    if (k == name) return v;
  return std::nullopt;
}

const std::vector<std::string>& sweep_quantity_names() {
  static const std::vector<std::string> names = {
      "win_prob",
      "rel_same_alice_max",
      "rel_same_bob_max",
      "rel_cross_alice_max",
      "rel_cross_bob_max",
      "cons_ab_max",
      "cons_product_max",
      "input_switch_max",
      "input_switch_bound",
      "pauli_consistency_max",
      "pauli_anticommute_max",
      "pauli_commute_max",
      "m_expectation",
      "fidelity_bound",
      "fidelity_deficit",
      "appendixb_min_expectation",
      "appendixb_chain_total",
      "appendixb_direct_residual",
  };
  return names;
}

const std::vector<std::string>& fitted_quantity_names() {
  static const std::vector<std::string> names = {
      "fidelity_deficit",   "rel_same_alice_max",  "rel_same_bob_max",
      "rel_cross_alice_max", "rel_cross_bob_max",  "cons_ab_max",
  };
  return names;
}

namespace {

SweepCell run_cell(const SweepConfig& config, int n, double eps, std::uint64_t seed) {
  SweepCell cell;
  cell.n = n;
  cell.eps_target = eps;
  cell.seed = seed;
  cell.kind = perturb_kind_name(config.kind);
  auto put = [&](const std::string& k, double v) { cell.quantities.emplace_back(k, v); };
  try {
    const PureStrategy ideal = ideal_parallel(n);
    const PureStrategy s = eps > 0 ? perturb(ideal, eps, seed, config.kind) : ideal;
    const double wp = win_probability(s);
    cell.eps_measured = 1.0 - wp;
    put("win_prob", wp);

    const Dilation d = dilate(s);
    if (config.checks.count("relations")) {
      const auto rels = relation_residuals(d);
      put("rel_same_alice_max", max_residual_with_prefix(rels, "phase.alice.same_round"));
      put("rel_same_bob_max", max_residual_with_prefix(rels, "phase.bob.same_round"));
      put("rel_cross_alice_max", max_residual_with_prefix(rels, "commute.alice.cross_round"));
      put("rel_cross_bob_max", max_residual_with_prefix(rels, "commute.bob.cross_round"));
    }
    if (config.checks.count("consistency")) {
      const auto cons = consistency_residuals(d);
      put("cons_ab_max", max_residual_with_prefix(cons, "cons.ab"));
      put("cons_product_max", max_residual_with_prefix(cons, "cons.product"));
      put("input_switch_max", max_residual_with_prefix(cons, "input_switch"));
      put("input_switch_bound", 36.0 * d.eps);
    }
    if (config.checks.count("fidelity") || config.checks.count("isometry")) {
      const PauliFrame frame = pauli_frame(d);
      put("pauli_consistency_max",
          std::max(max_residual_with_prefix(frame.relations, "pauli.consistency.x"),
                   max_residual_with_prefix(frame.relations, "pauli.consistency.z")));
      put("pauli_anticommute_max", max_residual_with_prefix(frame.relations, "pauli.anticommute"));
      put("pauli_commute_max",
          std::max(max_residual_with_prefix(frame.relations, "pauli.commute.xx"),
                   max_residual_with_prefix(frame.relations, "pauli.commute.zz")));
      if (config.checks.count("fidelity")) {
        SwapEngine engine(d, frame);
        const bool sampled = n > 2 || config.sampled_budget > 0;
        const auto fid = sampled
                             ? epr_fidelity(engine, config.sampled_budget > 0 ? config.sampled_budget : 256,
                                            seed ^ 0x5eedf1de11u)
                             : epr_fidelity(engine);
        put("m_expectation", fid.m_expectation);
        put("fidelity_bound", fid.fidelity_bound);
        put("fidelity_deficit", 1.0 - fid.fidelity_bound);
      }
    }
    if (config.checks.count("appendixb") && n == 1) {
      const auto rep = appendix_b_audit(s);
      double mn = 1.0;
      for (const auto& w : rep.wins) mn = std::min(mn, w.expectation);
      put("appendixb_min_expectation", mn);
      put("appendixb_chain_total", rep.chain_total);
      put("appendixb_direct_residual", rep.direct_residual);
    }
  } catch (const std::exception& ex) {
    cell.failure = ex.what();
  }
  return cell;
}

}  // namespace

FitResult fit_power_law(const std::string& quantity, int n,
                        const std::vector<std::pair<double, double>>& points) {
  FitResult fit;
  fit.quantity = quantity;
  fit.n = n;
  std::vector<std::pair<double, double>> usable;
  std::set<double> distinct_eps;
  for (const auto& [eps, value] : points) {
    if (eps > 0 && value > 1e-13) {
      usable.emplace_back(std::log10(eps), std::log10(value));
      distinct_eps.insert(eps);
    }
  }
  fit.points = static_cast<int>(usable.size());
  if (points.empty()) {
    fit.skip_reason = "no data";
    return fit;
  }
  if (usable.empty()) {
    fit.skip_reason = "all deficits at numerical zero";
    return fit;
  }
  if (distinct_eps.size() < 3) {
    fit.skip_reason = "needs at least 3 distinct eps points";
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : usable) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(usable.size());
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) {
    fit.skip_reason = "degenerate abscissa";
    return fit;
  }
  fit.exponent = (m * sxy - sx * sy) / denom;
  fit.log10_constant = (sy - fit.exponent * sx) / m;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / m;
  for (const auto& [x, y] : usable) {
    const double pred = fit.log10_constant + fit.exponent * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - ybar) * (y - ybar);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.fitted = true;
  return fit;
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  SweepResult result;
  result.config = config;
  for (int n : config.n_values)
    for (double eps : config.eps_values)
      for (std::uint64_t seed : config.seeds) result.cells.push_back(run_cell(config, n, eps, seed));

  std::sort(result.cells.begin(), result.cells.end(), [](const SweepCell& a, const SweepCell& b) {
    if (a.n != b.n) return a.n < b.n;
    if (a.eps_target != b.eps_target) return a.eps_target < b.eps_target;
    return a.seed < b.seed;
  });

  if (config.checks.count("lemmas")) result.lemmas = run_all_lemmas(500);

  for (int n : config.n_values) {
    for (const auto& q : fitted_quantity_names()) {
      std::vector<std::pair<double, double>> points;
      for (const auto& cell : result.cells) {
        if (cell.n != n || !cell.failure.empty()) continue;
        const auto v = cell.quantity(q);
        if (v) points.emplace_back(cell.eps_measured, *v);
      }
      result.fits.push_back(fit_power_law(q, n, points));
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out;
  out += "schema_version,n,eps_target,eps_measured,seed,kind,failure";
  for (const auto& name : sweep_quantity_names()) out += "," + name;
  out += "\r\n";
  for (const auto& cell : result.cells) {
    out += "msq.sweep/1," + std::to_string(cell.n) + "," + format_double(cell.eps_target) + "," +
           format_double(cell.eps_measured) + "," + std::to_string(cell.seed) + "," + cell.kind +
           "," + cell.failure;
    for (const auto& name : sweep_quantity_names()) {
      const auto v = cell.quantity(name);
      out += ",";
      if (v) out += format_double(*v);
    }
    out += "\r\n";
  }
  return out;
}

std::string sweep_json(const SweepResult& result) {
  ordered_json j;
  j["schema"] = "msq.sweep/1";
  // the artifact describes the experiment, not where it was written
  ordered_json config = ordered_json::parse(sweep_config_to_json(result.config));
  config.erase("out_dir");
  j["config"] = std::move(config);
  ordered_json cells = ordered_json::array();
  for (const auto& cell : result.cells) {
    ordered_json c;
    c["n"] = cell.n;
    c["eps_target"] = cell.eps_target;
    c["eps_measured"] = cell.eps_measured;
    c["seed"] = cell.seed;
    c["kind"] = cell.kind;
    if (!cell.failure.empty()) c["failure"] = cell.failure;
    ordered_json q;
    for (const auto& [k, v] : cell.quantities) q[k] = v;
    c["quantities"] = std::move(q);
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  ordered_json fits = ordered_json::array();
  for (const auto& f : result.fits) {
    ordered_json e;
    e["quantity"] = f.quantity;
    e["n"] = f.n;
    e["fitted"] = f.fitted;
    if (!f.fitted) e["skip_reason"] = f.skip_reason;
    if (f.fitted) {
      e["exponent"] = f.exponent;
      e["log10_constant"] = f.log10_constant;
      e["r2"] = f.r2;
    }
    e["points"] = f.points;
    fits.push_back(std::move(e));
  }
  j["fits"] = std::move(fits);
  if (!result.lemmas.empty()) {
    j["lemmas"] = ordered_json::parse(lemma_outcomes_json(result.lemmas));
  }
  return j.dump(2);
}

IdealCheckResult run_ideal_check(int n, long sampled_budget) {
  if (n < 1 || n > 3)
    throw FeasibilityError("ideal-check: n must be in [1, 3] (dense feasibility)");
  IdealCheckResult res;
  res.n = n;
  const PureStrategy s = ideal_parallel(n);
  res.win_prob = win_probability(s);

  const Dilation d = dilate(s);
  RigidityReport& rep = res.report;
  rep.n = n;
  rep.eps = d.eps;
  rep.seed = 0;
  rep.kind = "none";
  auto rels = relation_residuals(d);
  auto cons = consistency_residuals(d);
  const PauliFrame frame = pauli_frame(d);
  rep.relations = std::move(rels);
  rep.relations.insert(rep.relations.end(), cons.begin(), cons.end());
  rep.relations.insert(rep.relations.end(), frame.relations.begin(), frame.relations.end());

  SwapEngine engine(d, frame);
  FidelityResult fid;
  if (n <= 2) {
    fid = epr_fidelity(engine);
    // expectation table over the certificate labels
    const auto& terms = magic_round_terms();
    long count = 1;
    for (int k = 0; k < n; ++k) count *= 10;
    for (long x = 0; x < count; ++x) {
      long rem = x;
      std::uint32_t sbits = 0, tbits = 0;
      for (int k = 0; k < n; ++k) {
        const MagicTerm& term = terms[rem % 10];
        rem /= 10;
        sbits |= term.s << (2 * k);
        tbits |= term.t << (2 * k);
      }
      const auto e = engine.full(sbits, tbits, sbits, tbits);
      rep.pauli_table.push_back({sbits, tbits, sbits, tbits, e.iso, e.direct, e.discrepancy});
    }
  } else {
    fid = epr_fidelity(engine, sampled_budget, 0x1dea1u);
  }
  rep.m_expectation = fid.m_expectation;
  rep.fidelity_bound = fid.fidelity_bound;

  res.max_residual = 0.0;
  for (const auto& e : rep.relations) res.max_residual = std::max(res.max_residual, e.residual);
  for (const auto& p : rep.pauli_table) res.max_residual = std::max(res.max_residual, p.discrepancy);
  if (n == 1) {
    const auto apx = appendix_b_audit(s);
    for (const auto& w : apx.wins)
      res.max_residual = std::max(res.max_residual, 1.0 - w.expectation);
    res.max_residual = std::max(res.max_residual, apx.chain_total);
  }
  res.pass = res.win_prob >= 1.0 - 1e-10 && res.max_residual <= 1e-8 &&
             rep.fidelity_bound >= 1.0 - 1e-8;
  return res;
}

std::string ideal_check_json(const IdealCheckResult& result) {
  ordered_json j;
  j["schema"] = "msq.ideal-check/1";
  j["n"] = result.n;
  j["win_prob"] = result.win_prob;
  j["max_residual"] = result.max_residual;
  j["pass"] = result.pass;
  j["report"] = ordered_json::parse(result.report.to_json_string());
  return j.dump(2);
}

}  // namespace msq
