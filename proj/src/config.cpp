#include "rmc/config.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace rmc {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         message),
      line_(line) {}

MethodKind parse_method_kind(const std::string& name) {
  if (name == "kriging") return MethodKind::Kriging;
  if (name == "lsmc-poly") return MethodKind::LsmcPoly;
  if (name == "lsmc-bw11") return MethodKind::LsmcBw11;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string to_string(MethodKind k) {
  switch (k) {
    case MethodKind::Kriging: return "kriging";
    case MethodKind::LsmcPoly: return "lsmc-poly";
    case MethodKind::LsmcBw11: return "lsmc-bw11";
  }
  return "?";
}

MarketModel RunConfig::model() const {
  return sv ? MarketModel(sv_params, grid) : MarketModel(gbm, grid);
}

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(source_, n.IsDefined() ? n.Mark().line + 1 : 0, msg);
  }

  YAML::Node section(const YAML::Node& parent, const std::string& key, bool required,
                     std::initializer_list<const char*> allowed) const {
    const YAML::Node n = parent[key];
    if (!n) {
      if (required) fail(parent, "missing section '" + key + "'");
      return n;
    }
    if (!n.IsMap()) fail(n, "'" + key + "' must be a mapping");
    check_keys(n, key, allowed);
    return n;
  }

  void check_keys(const YAML::Node& map, const std::string& where,
                  std::initializer_list<const char*> allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!ok.count(k)) fail(kv.first, "unknown key '" + k + "' in '" + where + "'");
    }
  }

  template <class T>
  T get(const YAML::Node& map, const std::string& key, std::optional<T> fallback = {}) const {
    const YAML::Node n = map[key];
    if (!n) {
      if (fallback) return *fallback;
      fail(map, "missing field '" + key + "'");
    }
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "field '" + key + "' has the wrong type");
    }
  }

  double positive(const YAML::Node& map, const std::string& key,
                  std::optional<double> fallback = {}) const {
    const double v = get<double>(map, key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail(map[key] ? map[key] : map, "'" + key + "' must be positive");
    return v;
  }

  std::vector<double> vec(const YAML::Node& map, const std::string& key) const {
    const YAML::Node n = map[key];
    if (!n) fail(map, "missing field '" + key + "'");
    std::vector<double> out;
    try {
      if (n.IsSequence()) {
        for (const auto& e : n) out.push_back(e.as<double>());
      } else {
        out.push_back(n.as<double>());
      }
    } catch (const YAML::Exception&) {
      fail(n, "field '" + key + "' must be a number or a list of numbers");
    }
    for (double v : out)
      if (!std::isfinite(v)) fail(n, "field '" + key + "' must be finite");
    return out;
  }

  template <class E, class F>
  E choice(const YAML::Node& map, const std::string& key, F parse, std::optional<std::string> fallback = {}) const {
    const std::string s = get<std::string>(map, key, fallback);
    try {
      return parse(s);
    } catch (const std::invalid_argument& e) {
      fail(map[key] ? map[key] : map, e.what());
    }
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  Reader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source, 1, "top level must be a mapping");
  rd.check_keys(root, "top level", {"name", "model", "grid", "contract", "method", "run", "output"});

  RunConfig cfg;
  cfg.name = rd.get<std::string>(root, "name", std::string(std::filesystem::path(source).stem()));

  // grid
  const YAML::Node grid = rd.section(root, "grid", true, {"maturity", "n_exercise"});
  cfg.grid.maturity = rd.positive(grid, "maturity");
  cfg.grid.n_exercise = rd.get<int>(grid, "n_exercise");
  if (cfg.grid.n_exercise < 1) rd.fail(grid["n_exercise"], "'n_exercise' must be >= 1");

  // model
  const YAML::Node model = rd.section(root, "model", true,
                                      {"type", "r", "delta", "sigma", "x0", "a", "m1", "nu", "rho", "euler_dt"});
  const std::string type = rd.get<std::string>(model, "type");
  std::size_t dim = 0;
  if (type == "gbm") {
    cfg.gbm.r = rd.get<double>(model, "r");
    cfg.gbm.delta = rd.get<double>(model, "delta", 0.0);
    cfg.gbm.x0 = rd.vec(model, "x0");
    dim = cfg.gbm.x0.size();
    cfg.gbm.sigma = rd.vec(model, "sigma");
    if (cfg.gbm.sigma.size() == 1 && dim > 1) cfg.gbm.sigma.assign(dim, cfg.gbm.sigma[0]);
    if (cfg.gbm.sigma.size() != dim) rd.fail(model["sigma"], "'sigma' needs one entry per coordinate of x0");
    for (double s : cfg.gbm.sigma)
      if (s < 0.0) rd.fail(model["sigma"], "'sigma' must be >= 0");
    for (double x : cfg.gbm.x0)
      if (!(x > 0.0)) rd.fail(model["x0"], "'x0' must be positive");
  } else if (type == "sv") {
    cfg.sv = true;
    auto& p = cfg.sv_params;
    p.r = rd.get<double>(model, "r");
    p.a = rd.get<double>(model, "a");
    p.m1 = rd.get<double>(model, "m1");
    p.nu = rd.get<double>(model, "nu");
    p.rho = rd.get<double>(model, "rho");
    p.euler_dt = rd.positive(model, "euler_dt");
    const auto x0 = rd.vec(model, "x0");
    if (x0.size() != 2) rd.fail(model["x0"], "'x0' must be [price, log-vol]");
    p.x0 = {x0[0], x0[1]};
    try {
      p.validate(cfg.grid.dt());
    } catch (const std::invalid_argument& e) {
      rd.fail(model, e.what());
    }
    dim = 2;
  } else {
    rd.fail(model["type"], "model type must be 'gbm' or 'sv'");
  }

  // contract
  const YAML::Node contract = rd.section(root, "contract", true, {"payoff", "strike"});
  cfg.contract.family = rd.choice<PayoffFamily>(contract, "payoff", [](const std::string& s) {
    return parse_payoff_family(s);
  });
  cfg.contract.strike = rd.positive(contract, "strike");
  cfg.contract.rate = cfg.sv ? cfg.sv_params.r : cfg.gbm.r;
  cfg.contract.assets = cfg.sv ? 1 : dim;
  if (cfg.contract.family == PayoffFamily::Put && cfg.contract.assets != 1)
    rd.fail(contract["payoff"], "'put' needs a one-asset model; use 'basket-put'");

  // method
  const YAML::Node method = rd.section(
      root, "method", true,
      {"kind", "design", "budget", "reps", "kernel", "noise", "response", "hyperparameters",
       "domain", "itm_filter", "adaptive", "sequential", "degree", "tensor", "itm_only", "cells",
       "starts"});
  cfg.method = rd.choice<MethodKind>(method, "kind", parse_method_kind);
  const long budget = rd.get<long>(method, "budget");
  if (budget < 1) rd.fail(method["budget"], "'budget' must be >= 1");
  cfg.budget = static_cast<std::size_t>(budget);

  if (cfg.method == MethodKind::Kriging) {
    auto& d = cfg.design;
    d.kind = rd.choice<DesignKind>(method, "design", parse_design_kind);
    d.reps = rd.get<int>(method, "reps");
    if (d.reps < 1) rd.fail(method["reps"], "'reps' must be >= 1");
    if (cfg.budget % static_cast<std::size_t>(d.reps) != 0)
      rd.fail(method["budget"], "'budget' must be a multiple of 'reps'");
    d.sites = cfg.budget / static_cast<std::size_t>(d.reps);
    auto& fo = cfg.regression.fit;
    fo.family = rd.choice<KernelFamily>(method, "kernel", parse_kernel_family, std::string("matern-5/2"));
    fo.noise = rd.choice<NoiseMode>(method, "noise", parse_noise_mode, std::string("empirical"));
    fo.starts = rd.get<int>(method, "starts", 5);
    if (fo.starts < 1) rd.fail(method["starts"], "'starts' must be >= 1");
    cfg.regression.response =
        rd.choice<Response>(method, "response", parse_response, std::string("continuation"));
    if (const YAML::Node hp = rd.section(method, "hyperparameters", false, {"s2", "lengthscales"})) {
      KernelSpec k;
      k.family = fo.family;
      k.s2 = rd.positive(hp, "s2");
      k.lengthscales = rd.vec(hp, "lengthscales");
      if (k.lengthscales.size() == 1 && dim > 1) k.lengthscales.assign(dim, k.lengthscales[0]);
      if (k.lengthscales.size() != dim) rd.fail(hp["lengthscales"], "one length-scale per coordinate");
      for (double t : k.lengthscales)
        if (!(t > 0.0)) rd.fail(hp["lengthscales"], "length-scales must be positive");
      fo.fixed = k;
    }
    d.itm_filter = rd.get<bool>(method, "itm_filter", true);
    if (d.kind != DesignKind::Probabilistic) {
      const YAML::Node dom = rd.section(method, "domain", true, {"lo", "hi", "constraint"});
      d.domain.lo = rd.vec(dom, "lo");
      d.domain.hi = rd.vec(dom, "hi");
      if (d.domain.lo.size() != dim || d.domain.hi.size() != dim)
        rd.fail(dom, "domain bounds need one entry per state coordinate");
      for (std::size_t j = 0; j < dim; ++j)
        if (!(d.domain.lo[j] < d.domain.hi[j])) rd.fail(dom, "domain needs lo < hi in every coordinate");
      const std::string c = rd.get<std::string>(dom, "constraint", std::string("none"));
      if (c == "none") {
        cfg.constraint = DomainConstraint::None;
      } else if (c == "itm") {
        cfg.constraint = DomainConstraint::InTheMoney;
        const ContractSpec cs = cfg.contract;
        d.domain.constraint = [cs](std::span<const double> x) { return itm_closure(cs, x); };
        try {
          d.domain.check_feasible();
        } catch (const DomainInfeasible& e) {
          rd.fail(dom, e.what());
        }
      } else {
        rd.fail(dom["constraint"], "constraint must be 'none' or 'itm'");
      }
    }
    if (const YAML::Node ad = rd.section(method, "adaptive", false, {"target_variance", "pilot"})) {
      d.adaptive_reps = true;
      d.target_variance = rd.positive(ad, "target_variance");
      d.pilot_reps = rd.get<int>(ad, "pilot", 10);
      if (d.pilot_reps < 2) rd.fail(ad["pilot"], "'pilot' must be >= 2");
    }
    if (const YAML::Node sq = rd.section(method, "sequential", false,
                                         {"n0", "candidates", "acquisition", "refit_every"})) {
      auto& s = d.sequential;
      s.n0 = static_cast<std::size_t>(rd.get<long>(sq, "n0", 10L));
      s.candidates = static_cast<std::size_t>(rd.get<long>(sq, "candidates", 0L));
      s.acquisition = rd.choice<Acquisition>(sq, "acquisition", parse_acquisition, std::string("zc-sur"));
      s.refit_every = rd.get<int>(sq, "refit_every", 10);
    }
    if (d.kind == DesignKind::Sequential) {
      if (d.sequential.n0 < 3) rd.fail(method, "sequential 'n0' must be >= 3");
      if (d.sites < d.sequential.n0) rd.fail(method, "budget/reps must be at least sequential 'n0'");
      if (d.sequential.refit_every < 0) rd.fail(method, "'refit_every' must be >= 0");
    }
    if (d.kind != DesignKind::Sequential && d.sites < 3)
      rd.fail(method, "kriging needs at least 3 design sites (budget/reps)");
  } else {
    auto& b = cfg.basis;
    if (cfg.method == MethodKind::LsmcPoly) {
      b.kind = BasisSpec::Kind::Polynomial;
      b.degree = rd.get<int>(method, "degree", 3);
      if (b.degree < 0) rd.fail(method["degree"], "'degree' must be >= 0");
      b.tensor = rd.get<bool>(method, "tensor", false);
      b.itm_only = rd.get<bool>(method, "itm_only", true);
    } else {
      b.kind = BasisSpec::Kind::Partition;
      b.cells = rd.get<int>(method, "cells");
      if (b.cells < 1) rd.fail(method["cells"], "'cells' must be >= 1");
    }
  }

  // run
  if (const YAML::Node run = rd.section(root, "run", false,
                                        {"seed", "oos_seed", "n_out", "replications", "threads"})) {
    if (run["seed"]) {
      cfg.seed = rd.get<std::uint64_t>(run, "seed");
      cfg.seed_given = true;
    }
    cfg.oos_seed = rd.get<std::uint64_t>(run, "oos_seed", std::uint64_t{1});
    const long n_out = rd.get<long>(run, "n_out", 100000L);
    if (n_out < 1) rd.fail(run["n_out"], "'n_out' must be >= 1");
    cfg.n_out = static_cast<std::size_t>(n_out);
    cfg.replications = rd.get<int>(run, "replications", 1);
    if (cfg.replications < 1) rd.fail(run["replications"], "'replications' must be >= 1");
    const int threads = rd.get<int>(run, "threads", 0);
    if (threads < 0) rd.fail(run["threads"], "'threads' must be >= 0");
    cfg.threads = static_cast<unsigned>(threads);
  }

  if (const YAML::Node out = rd.section(root, "output", false, {"diagnostics"}))
    if (out["diagnostics"]) cfg.diagnostics_dir = rd.get<std::string>(out, "diagnostics");

  try {
    cfg.model();
    cfg.contract.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json sims_json(const SimCounters& design, const SimCounters& valuation) {
  return {{"design", design.transitions},
          {"valuation", valuation.transitions},
          {"total", design.transitions + valuation.transitions},
          {"clamps", design.clamps + valuation.clamps}};
}

void write_diagnostics(const RunConfig& cfg, int rep, const PolicyRun& run) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(*cfg.diagnostics_dir) / cfg.name / ("rep" + std::to_string(rep));
  fs::create_directories(dir);
  for (const auto& d : run.dates) {
    std::ofstream f(dir / ("date_" + std::to_string(d.date) + ".csv"));
    write_date_csv(f, d);
    if (!d.trace.empty()) {
      std::ofstream tr(dir / ("trace_" + std::to_string(d.date) + ".csv"));
      write_trace_csv(tr, d.trace);
    }
  }
}

}  // namespace

nlohmann::json run_job(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const MarketModel model = cfg.model();
  nlohmann::json reps = nlohmann::json::array();
  SimCounters design_total, valuation_total;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < cfg.replications; ++r) {
    const std::uint64_t seed = replication_seed(cfg.seed, static_cast<std::uint64_t>(r));
    nlohmann::json rep;
    rep["seed"] = seed;
    Valuation val;
    SimCounters design_sims;
    if (cfg.method == MethodKind::Kriging) {
      const PolicyRun run = backward_induction(model, cfg.contract, cfg.design, cfg.regression, seed);
      val = out_of_sample_value(run.policy, model, model.x0(), cfg.n_out, cfg.oos_seed);
      design_sims = run.sims;
      std::vector<double> loss;
      nlohmann::json fits = nlohmann::json::array();
      for (const auto& d : run.dates) {
        loss.push_back(d.loss.integrated);
        nlohmann::json f;
        f["date"] = d.date;
        f["noise"] = to_string(d.fit.noise_used);
        f["log_likelihood"] = d.fit.log_likelihood;
        f["converged"] = d.fit.converged;
        const auto* s = dynamic_cast<const KrigingContinuation*>(run.policy.surface(d.date));
        if (s != nullptr) {
          f["s2"] = s->model().kernel().s2;
          f["lengthscales"] = s->model().kernel().lengthscales;
          f["jitter"] = s->model().jitter();
        }
        fits.push_back(f);
      }
      rep["loss_series"] = loss;
      rep["fits"] = fits;
      if (cfg.diagnostics_dir) write_diagnostics(cfg, r, run);
    } else {
      const LsmcRun run = lsmc_backward(model, cfg.contract, cfg.budget, cfg.basis, seed);
      val = out_of_sample_value(run.policy, model, model.x0(), cfg.n_out, cfg.oos_seed);
      design_sims = run.sims;
      rep["ridge_fallbacks"] = run.ridge_fallbacks;
    }
    rep["value"] = val.value;
    rep["mc_mean"] = val.mean;
    rep["se"] = val.se;
    rep["sims"] = sims_json(design_sims, val.sims);
    design_total += design_sims;
    valuation_total += val.sims;
    sum += val.value;
    sum_sq += val.value * val.value;
    reps.push_back(std::move(rep));
  }
  const double n = cfg.replications;
  const double mean = sum / n;
  nlohmann::json out;
  out["name"] = cfg.name;
  out["method"] = to_string(cfg.method);
  if (cfg.method == MethodKind::Kriging) {
    out["design"] = to_string(cfg.design.kind);
    out["sites"] = cfg.design.sites;
    out["reps"] = cfg.design.reps;
    out["kernel"] = to_string(cfg.regression.fit.family);
  }
  out["budget"] = cfg.budget;
  out["seed"] = cfg.seed;
  out["oos_seed"] = cfg.oos_seed;
  out["n_out"] = cfg.n_out;
  out["replications"] = cfg.replications;
  out["value"] = mean;
  out["se"] = reps[0]["se"];
  if (cfg.replications > 1)
    out["sd"] = std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)));
  if (cfg.method == MethodKind::Kriging) out["loss_series"] = reps[0]["loss_series"];
  out["sims"] = sims_json(design_total, valuation_total);
  out["runs"] = reps;
  out["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Design export_design(const RunConfig& cfg, int date) {
  if (cfg.method != MethodKind::Kriging)
    throw std::invalid_argument("export-design needs a kriging method block");
  const MarketModel model = cfg.model();
  if (date < 1 || date >= cfg.grid.n_exercise)
    throw std::invalid_argument("export-design: date must be in 1..n_exercise-1");
  const PolicyRun run = backward_induction(model, cfg.contract, cfg.design, cfg.regression,
                                           replication_seed(cfg.seed, 0), date);
  return run.dates.front().design;
}

}  // namespace rmc
