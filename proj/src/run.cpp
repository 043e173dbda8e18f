#include "defectfe/run.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "defectfe/cauchy_born.hpp"
#include "defectfe/coarse_grain.hpp"
#include "defectfe/errors.hpp"
#include "defectfe/oracles.hpp"

namespace defectfe {

using nlohmann::json;

namespace {

const std::pair<Selector, const char*> kSelectors[] = {
    {Selector::gn_sample, "gn-sample"}, {Selector::gn_dense, "gn-dense"},
    {Selector::gncg, "gncg"},           {Selector::ginf, "ginf"},
    {Selector::convergence, "convergence"}, {Selector::check, "check"},
    {Selector::cb_table, "cb-table"},
};

const std::set<std::string> kEstimators = {"gncg", "gn-sample", "gn-dense", "gn-exact", "gn-transfer"};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw InvalidInput(field + ": " + why);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      bad(where.empty() ? key : where + "." + key, "unknown field");
    }
  }
}

template <typename T>
T field(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(path, e.what());
  }
}

Interval interval_field(const json& obj, const std::string& key, const std::string& path, Interval fallback) {
  if (!obj.contains(key)) return fallback;
  const auto v = field<std::vector<double>>(obj, key, path, {});
  if (v.size() != 2) bad(path, "expected [lo, hi]");
  return {v[0], v[1]};
}

PotentialSpec potential_field(const json& j, const std::string& path) {
  if (j.is_null()) return {"none", {}};
  only_keys(j, path, {"kind", "alpha", "coefficients"});
  PotentialSpec s;
  s.kind = field<std::string>(j, "kind", path + ".kind", "");
  if (s.kind == "harmonic") {
    if (!j.contains("alpha")) bad(path + ".alpha", "required for a harmonic potential");
    s.parameters = {field<double>(j, "alpha", path + ".alpha", 0.0)};
  } else if (s.kind == "polynomial") {
    s.parameters = field<std::vector<double>>(j, "coefficients", path + ".coefficients", {});
  } else if (s.kind != "quartic-paper" && s.kind != "none") {
    bad(path + ".kind", "unknown potential kind '" + s.kind + "'");
  }
  try {
    (void)make_potential(s);
  } catch (const InvalidInput& e) {
    bad(path, e.what());
  }
  return s;
}

void forces_field(const json& j, RunConfig& cfg) {
  if (j.is_null()) return;
  only_keys(j, "forces", {"kind", "entries", "p"});
  const auto kind = field<std::string>(j, "kind", "forces.kind", "none");
  if (kind == "none") {
    cfg.forces = {};
  } else if (kind == "explicit") {
    cfg.forces.kind = ForceKind::explicit_list;
    cfg.forces.entries = field<std::vector<double>>(j, "entries", "forces.entries", {});
  } else if (kind == "power-law") {
    cfg.forces.kind = ForceKind::power_law;
    if (!j.contains("p")) bad("forces.p", "required for power-law forces");
    if (j.at("p").is_array()) {
      cfg.force_exponents = field<std::vector<double>>(j, "p", "forces.p", {});
      if (cfg.force_exponents.empty()) bad("forces.p", "empty list");
    } else {
      cfg.force_exponents = {field<double>(j, "p", "forces.p", 0.0)};
    }
    for (double p : cfg.force_exponents) {
      if (!(p > 2.0)) bad("forces.p", "power-law exponent must exceed 2 for summable loads");
    }
    cfg.forces.exponent = cfg.force_exponents.front();
  } else {
    bad("forces.kind", "unknown kind '" + kind + "'");
  }
}

void sampler_field(const json& j, MalaConfig& s) {
  only_keys(j, "sampler", {"step", "steps_per_stage", "burn_in", "replicas", "stages", "adapt", "target_acceptance"});
  s.step = field<double>(j, "step", "sampler.step", s.step);
  s.steps_per_stage = field<std::size_t>(j, "steps_per_stage", "sampler.steps_per_stage", s.steps_per_stage);
  s.burn_in = field<double>(j, "burn_in", "sampler.burn_in", s.burn_in);
  s.replicas = field<std::size_t>(j, "replicas", "sampler.replicas", s.replicas);
  s.stages = field<std::size_t>(j, "stages", "sampler.stages", s.stages);
  s.adapt = field<bool>(j, "adapt", "sampler.adapt", s.adapt);
  const Interval t = interval_field(j, "target_acceptance", "sampler.target_acceptance", {s.target_lo, s.target_hi});
  s.target_lo = t.lo;
  s.target_hi = t.hi;
}

void quadrature_field(const json& j, QuadratureConfig& q) {
  only_keys(j, "quadrature", {"rel_tol", "abs_tol", "truncation", "max_subdivisions"});
  q.rel_tol = field<double>(j, "rel_tol", "quadrature.rel_tol", q.rel_tol);
  q.abs_tol = field<double>(j, "abs_tol", "quadrature.abs_tol", q.abs_tol);
  q.truncation = field<double>(j, "truncation", "quadrature.truncation", q.truncation);
  q.max_subdivisions = field<int>(j, "max_subdivisions", "quadrature.max_subdivisions", q.max_subdivisions);
}

// ---------------------------------------------------------------------------

ForceSequence forces_for(const RunConfig& cfg, double p, std::size_t N) {
  ForceSpec spec = cfg.forces;
  if (spec.kind == ForceKind::power_law) spec.exponent = p;
  return build_force_sequence(spec, N);
}

ChainSpec chain_for(const RunConfig& cfg, double p, std::size_t N) {
  ChainSpec s;
  s.N = N;
  s.A = cfg.A;
  s.psi = make_potential(cfg.potential);
  s.defect.potential = make_potential(cfg.defect);
  s.forces = forces_for(cfg, p, N);
  s.beta = cfg.beta;
  return s;
}

double limit_value(const RunConfig& cfg, double p) {
  std::size_t bonds = std::max<std::size_t>(2, cfg.forces.entries.size());
  if (!cfg.N.empty()) bonds = std::max(bonds, cfg.N.front());
  return CoarseGrainedChain(chain_for(cfg, p, bonds), cfg.quadrature).limit_free_energy();
}

double deterministic_estimate(const RunConfig& cfg, const std::string& est, const ChainSpec& spec) {
  if (est == "gncg") return CoarseGrainedChain(spec, cfg.quadrature).free_energy();
  if (est == "gn-dense") return dense_G_N(spec, cfg.quadrature);
  if (est == "gn-transfer") return transfer_G_N(spec, {cfg.transfer_spacing});
  if (est == "gn-exact") {
    if (spec.psi.kind() != PotentialKind::harmonic) bad("estimators", "gn-exact needs a harmonic potential");
    double beta = 0.0;
    if (!spec.defect.absent()) {
      if (spec.defect.potential.kind() != PotentialKind::harmonic) bad("estimators", "gn-exact needs a harmonic defect");
      beta = spec.defect.potential.stiffness();
    }
    const auto h = spec.forces.entries();
    return gaussian_chain_G_N(spec.psi.stiffness(), beta, spec.A, spec.N, std::vector<double>(h.begin(), h.end()));
  }
  bad("estimators", "unknown estimator '" + est + "'");
}

// Runs `job(k)` for k in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto loop = [&] {
    for (std::size_t k; !failed && (k = next++) < count;) {
      try {
        job(k);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const unsigned width = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(count, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < width; ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string label(const RunConfig& cfg, const std::string& est, double p) {
  if (cfg.force_exponents.size() <= 1) return est;
  return est + "@p=" + format_double(p);
}

std::vector<double> exponents(const RunConfig& cfg) {
  return cfg.force_exponents.empty() ? std::vector<double>{0.0} : cfg.force_exponents;
}

RunResult convergence_rows(const RunConfig& cfg, const std::vector<std::string>& estimators, unsigned workers) {
  RunResult res;
  std::ostringstream comments;
  std::ostringstream summary;
  for (double p : exponents(cfg)) {
    const double ginf = limit_value(cfg, p);
    for (const std::string& est : estimators) {
      std::vector<ConvergenceRow> rows(cfg.N.size());
      auto one = [&](std::size_t k) {
        const ChainSpec spec = chain_for(cfg, p, cfg.N[k]);
        ConvergenceRow& r = rows[k];
        r.N = cfg.N[k];
        r.estimator = label(cfg, est, p);
        r.ginf = ginf;
        if (est == "gn-sample") {
          MalaConfig m = cfg.sampler;
          m.seed = cfg.seed;
          m.workers = workers;
          const FreeEnergyEstimate e = estimate_G_N(spec, m);
          r.value = e.value;
          r.std_error = e.std_error;
          comments << "# sample N=" << r.N << " estimator=" << r.estimator << " seed=" << e.seed
                   << " config_hash=" << std::hex << e.config_hash << std::dec << " samples=" << e.total_samples
                   << " nonfinite=" << e.rejected_nonfinite << '\n';
        } else {
          r.value = deterministic_estimate(cfg, est, spec);
        }
        r.abs_err = std::abs(r.value - ginf);
      };
      if (est == "gn-sample") {
        for (std::size_t k = 0; k < rows.size(); ++k) one(k);
      } else {
        parallel_for(rows.size(), workers, one);
      }
      std::string slope_text = "n/a";
      try {
        const SlopeFit fit = fit_slope(rows);
        comments << "# slope estimator=" << label(cfg, est, p) << " value=" << format_double(fit.slope)
                 << " intercept=" << format_double(fit.intercept) << " residual=" << format_double(fit.residual)
                 << " used=" << fit.used << " excluded=" << fit.excluded << '\n';
        slope_text = format_double(fit.slope);
      } catch (const InvalidInput& e) {
        comments << "# slope estimator=" << label(cfg, est, p) << " undefined (" << e.what() << ")\n";
      }
      summary << label(cfg, est, p) << ": " << rows.size() << " rows, slope " << slope_text << "; ";
      res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    }
  }
  std::ostringstream csv;
  write_rows(csv, res.rows);
  csv << "# selector=" << to_string(cfg.selector) << " seed=" << cfg.seed << '\n' << comments.str();
  res.csv = csv.str();
  res.summary = summary.str();
  return res;
}

}  // namespace

Selector parse_selector(const std::string& name) {
  for (const auto& [s, n] : kSelectors) {
    if (name == n) return s;
  }
  throw InvalidInput("selector: unknown computation '" + name + "'");
}

std::string to_string(Selector s) {
  for (const auto& [sel, n] : kSelectors) {
    if (sel == s) return n;
  }
  return "?";
}

void RunConfig::validate() const {
  if (beta != 1.0) bad("beta", "must equal 1 (got " + format_double(beta) + ")");
  if (!std::isfinite(A)) bad("A", "must be finite");
  for (std::size_t k = 0; k < N.size(); ++k) {
    if (N[k] < 2) bad("N", "every entry must be at least 2");
    if (k > 0 && N[k] <= N[k - 1]) bad("N", "must be strictly increasing");
  }
  const bool needs_n = selector != Selector::ginf && selector != Selector::check && selector != Selector::cb_table;
  if (needs_n && N.empty()) bad("N", "required for selector " + to_string(selector));
  for (const auto& e : estimators) {
    if (!kEstimators.contains(e)) bad("estimators", "unknown estimator '" + e + "'");
  }
  if (forces.kind == ForceKind::explicit_list && !N.empty() && forces.entries.size() > N.front()) {
    bad("forces.entries", "longer than the smallest N");
  }
  sampler.validate();
  try {
    quadrature.validate();
  } catch (const InvalidInput& e) {
    bad("quadrature", e.what());
  }
  if (!(transfer_spacing > 0.0)) bad("transfer.spacing", "must be positive");
  if (selector == Selector::cb_table) {
    if (!(cb_range.hi > cb_range.lo)) bad("cb_table.range", "must satisfy lo < hi");
    if (cb_nodes < 8) bad("cb_table.nodes", "must be at least 8");
  }
}

RunConfig parse_config(const std::string& text, bool desk) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw InvalidInput("config: top level must be an object");
  if (desk && root.contains("desk")) root.merge_patch(root.at("desk"));
  root.erase("desk");
  only_keys(root, "",
            {"computation", "potential", "defect", "forces", "A", "N", "beta", "estimators", "sampler", "quadrature",
             "transfer", "output", "seed", "cb_table", "check", "description"});

  RunConfig cfg;
  if (root.contains("computation")) cfg.selector = parse_selector(field<std::string>(root, "computation", "computation", ""));
  if (root.contains("potential")) cfg.potential = potential_field(root.at("potential"), "potential");
  if (root.contains("defect")) cfg.defect = potential_field(root.at("defect"), "defect");
  if (root.contains("forces")) forces_field(root.at("forces"), cfg);
  cfg.A = field<double>(root, "A", "A", cfg.A);
  cfg.N = field<std::vector<std::size_t>>(root, "N", "N", {});
  cfg.beta = field<double>(root, "beta", "beta", cfg.beta);
  cfg.estimators = field<std::vector<std::string>>(root, "estimators", "estimators", cfg.estimators);
  if (root.contains("sampler")) sampler_field(root.at("sampler"), cfg.sampler);
  if (root.contains("quadrature")) quadrature_field(root.at("quadrature"), cfg.quadrature);
  if (root.contains("transfer")) {
    only_keys(root.at("transfer"), "transfer", {"spacing"});
    cfg.transfer_spacing = field<double>(root.at("transfer"), "spacing", "transfer.spacing", cfg.transfer_spacing);
  }
  cfg.output = field<std::string>(root, "output", "output", "");
  cfg.seed = field<std::uint64_t>(root, "seed", "seed", cfg.seed);
  cfg.cb_range = {cfg.A - 2.0, cfg.A + 2.0};
  if (root.contains("cb_table")) {
    const json& t = root.at("cb_table");
    only_keys(t, "cb_table", {"range", "nodes"});
    cfg.cb_range = interval_field(t, "range", "cb_table.range", cfg.cb_range);
    cfg.cb_nodes = field<int>(t, "nodes", "cb_table.nodes", cfg.cb_nodes);
  }
  if (root.contains("check")) {
    const json& c = root.at("check");
    only_keys(c, "check", {"window", "grid_points"});
    if (c.contains("window")) cfg.check_window = interval_field(c, "window", "check.window", {});
    cfg.check_grid = field<std::size_t>(c, "grid_points", "check.grid_points", cfg.check_grid);
  }
  return cfg;
}

RunConfig load_config(const std::string& path, bool desk) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), desk);
}

RunResult run(const RunConfig& cfg, unsigned workers) {
  cfg.validate();
  const Potential psi = make_potential(cfg.potential);
  const DefectSpec defect{make_potential(cfg.defect)};

  switch (cfg.selector) {
    case Selector::check: {
      const Interval w = cfg.check_window.value_or(Interval{cfg.A - 8.0, cfg.A + 8.0});
      const AssumptionReport rep = check_assumptions(psi, defect, w, cfg.check_grid);
      RunResult res;
      std::ostringstream csv;
      csv << "kappa1,kappa2,varsigma1,varsigma2,window_lo,window_hi,grid_points,pass\n"
          << format_double(rep.kappa1) << ',' << format_double(rep.kappa2) << ',' << format_double(rep.varsigma1)
          << ',' << format_double(rep.varsigma2) << ',' << format_double(w.lo) << ',' << format_double(w.hi) << ','
          << rep.grid_points << ',' << (rep.pass ? "pass" : "fail") << '\n';
      res.csv = csv.str();
      res.summary = "kappa1=" + format_double(rep.kappa1) + " kappa2=" + format_double(rep.kappa2) +
                    " varsigma1=" + format_double(rep.varsigma1) + " varsigma2=" + format_double(rep.varsigma2) +
                    (rep.pass ? " pass; " : " fail; ");
      return res;
    }
    case Selector::cb_table: {
      const CauchyBornEvaluator cb(psi, cfg.quadrature, {cfg.A - 8.0, cfg.A + 8.0});
      const CauchyBornEvaluator t = cb.tabulate(cfg.cb_range, cfg.cb_nodes);
      RunResult res;
      std::ostringstream csv;
      t.write_table_csv(csv);
      res.csv = csv.str();
      res.summary = "tabulated W on [" + format_double(cfg.cb_range.lo) + ", " + format_double(cfg.cb_range.hi) +
                    "] at " + std::to_string(cfg.cb_nodes) + " nodes; ";
      return res;
    }
    case Selector::ginf: {
      RunResult res;
      std::ostringstream summary;
      for (double p : exponents(cfg)) {
        ConvergenceRow r;
        r.estimator = label(cfg, "ginf", p);
        r.value = r.ginf = limit_value(cfg, p);
        res.rows.push_back(r);
        summary << r.estimator << " = " << format_double(r.value) << "; ";
      }
      std::ostringstream csv;
      write_rows(csv, res.rows);
      csv << "# selector=ginf\n";
      res.csv = csv.str();
      res.summary = summary.str();
      return res;
    }
    case Selector::gn_sample:
      return convergence_rows(cfg, {"gn-sample"}, workers);
    case Selector::gn_dense:
      return convergence_rows(cfg, {"gn-dense"}, workers);
    case Selector::gncg:
      return convergence_rows(cfg, {"gncg"}, workers);
    case Selector::convergence:
      return convergence_rows(cfg, cfg.estimators, workers);
  }
  throw InvalidInput("selector: unhandled");
}

}  // namespace defectfe
