#include "rmc/engine.hpp"

#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "rmc/parallel.hpp"

namespace rmc {

DesignKind parse_design_kind(const std::string& name) {
  if (name == "lhs") return DesignKind::Lhs;
  if (name == "sobol") return DesignKind::Sobol;
  if (name == "halton") return DesignKind::Halton;
  if (name == "grid") return DesignKind::Grid;
  if (name == "probabilistic") return DesignKind::Probabilistic;
  if (name == "sequential") return DesignKind::Sequential;
  throw std::invalid_argument("unknown design kind '" + name + "'");
}

std::string to_string(DesignKind k) {
  switch (k) {
    case DesignKind::Lhs: return "lhs";
    case DesignKind::Sobol: return "sobol";
    case DesignKind::Halton: return "halton";
    case DesignKind::Grid: return "grid";
    case DesignKind::Probabilistic: return "probabilistic";
    case DesignKind::Sequential: return "sequential";
  }
  return "?";
}

void DesignConfig::validate(std::size_t dim) const {
  if (sites < 1) throw std::invalid_argument("design: at least one site required");
  if (reps < 1) throw std::invalid_argument("design: reps must be >= 1");
  if (kind != DesignKind::Probabilistic) {
    domain.validate();
    if (domain.dim() != dim) throw std::invalid_argument("design: domain dimension mismatch");
  }
  if (adaptive_reps) {
    if (!(target_variance > 0.0)) throw std::invalid_argument("design: target variance must be positive");
    if (pilot_reps < 2) throw std::invalid_argument("design: pilot batch needs at least 2 reps");
  }
  if (kind == DesignKind::Sequential) sequential.validate(sites);
}

DateFitFailure::DateFitFailure(int date, const std::string& what)
    : FitFailure("fit failed at exercise date " + std::to_string(date) + ": " + what), date_(date) {}

namespace {


std::vector<double> simulate_batch(const StoppingPolicy& policy, const MarketModel& model,
                                   int date, std::span<const double> x, int reps, Rng& rng,
                                   SimCounters& counters) {
  std::vector<double> ys(static_cast<std::size_t>(reps));
  for (auto& y : ys) y = sample_payoff(policy, model, date, x, rng, counters);
  return ys;
}

Sites initial_sites(const DesignConfig& cfg, const MarketModel& model, const ContractSpec& contract,
                    int date, std::uint64_t seed, SimCounters& counters) {
  const StreamKey key{seed, date, Purpose::Design};
  switch (cfg.kind) {
    case DesignKind::Lhs: {
      Rng rng = key.stream(0);
      return lhs(cfg.sites, cfg.domain, rng);
    }
    case DesignKind::Sequential: {
      Rng rng = key.stream(0);
      return lhs(cfg.sequential.n0, cfg.domain, rng);
    }
    case DesignKind::Sobol: return sobol(cfg.sites, cfg.domain);
    case DesignKind::Halton: return halton(cfg.sites, cfg.domain);
    case DesignKind::Grid: return grid(cfg.sites, cfg.domain);
    case DesignKind::Probabilistic:
      return probabilistic(cfg.sites, model, date, model.x0(), key,
                           cfg.itm_filter ? &contract : nullptr, &counters);
  }
  throw std::logic_error("unhandled design kind");
}

}  // namespace

PolicyRun backward_induction(const MarketModel& model, const ContractSpec& contract,
                             const DesignConfig& cfg, const RegressionConfig& regression,
                             std::uint64_t seed, int last_date) {
  contract.validate();
  cfg.validate(model.dim());
  const TimeGrid& grid = model.grid();
  const std::size_t dim = model.dim();
  PolicyRun run{StoppingPolicy(contract, grid), {}, {}};
  if (grid.n_exercise <= 1) return run;
  if (last_date < 1 || last_date >= grid.n_exercise)
    throw std::invalid_argument("backward induction: last date must be in 1..n-1");

  const TransitionDensity density(model, model.x0(), stream_seed(seed, 0, Purpose::Pilot));
  const bool timing = regression.response == Response::Timing;
  run.dates.resize(static_cast<std::size_t>(grid.n_exercise - last_date));

  for (int date = grid.n_exercise - 1; date >= last_date; --date) {
    DateDiagnostics& diag = run.dates[static_cast<std::size_t>(date - last_date)];
    diag.date = date;
    diag.time = grid.date(date);
    const double t = diag.time;
    auto h_at = [&](std::span<const double> x) { return payoff(contract, t, x); };

    SimCounters counters;
    const Sites sites = initial_sites(cfg, model, contract, date, seed, counters);
    const std::size_t n = static_cast<std::size_t>(sites.cols());

    Design design;
    design.sites = sites;
    design.means.resize(static_cast<Eigen::Index>(n));
    design.variances.resize(static_cast<Eigen::Index>(n));
    design.reps.resize(static_cast<Eigen::Index>(n));
    std::vector<SimCounters> site_counters(n);
    const StreamKey rep_key{seed, date, Purpose::Replicates};
    parallel_for(n, [&](std::size_t i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      std::span<const double> x{&sites(0, ii), dim};
      Rng rng = rep_key.stream(i);
      std::vector<double> ys;
      if (cfg.adaptive_reps) {
        ys = simulate_batch(run.policy, model, date, x, cfg.pilot_reps, rng, site_counters[i]);
        const double pilot_var = batch_stats(ys).variance.value_or(0.0);
        const int m = std::max(cfg.pilot_reps, adaptive_replications(pilot_var, cfg.target_variance));
        const auto more = simulate_batch(run.policy, model, date, x, m - cfg.pilot_reps, rng,
                                         site_counters[i]);
        ys.insert(ys.end(), more.begin(), more.end());
      } else {
        ys = simulate_batch(run.policy, model, date, x, cfg.reps, rng, site_counters[i]);
      }
      const BatchStats st = batch_stats(ys);
      design.means[ii] = st.mean - (timing ? h_at(x) : 0.0);
      design.variances[ii] = st.variance.value_or(0.0);
      design.reps[ii] = static_cast<int>(ys.size());
    }, 1);
    for (const auto& c : site_counters) counters += c;

    FitOptions opts = regression.fit;
    opts.seed = stream_seed(seed, date, Purpose::Likelihood);
    std::unique_ptr<KrigingModel> fitted;
    try {
      FitResult fr = fit(design, opts);
      if (cfg.kind == DesignKind::Sequential) {
        SequentialProblem problem;
        problem.domain = cfg.domain;
        if (timing)
          problem.threshold = [](std::span<const double>) { return 0.0; };
        else
          problem.threshold = h_at;
        problem.weight = [&](std::span<const double> x) { return density(date, x); };
        const StreamKey aug_key{seed, date, Purpose::Augment};
        std::vector<SimCounters> aug_counters(cfg.sites);
        problem.simulate = [&](std::span<const double> x, std::size_t k) {
          Rng rng = aug_key.stream(k);
          auto ys = simulate_batch(run.policy, model, date, x, cfg.reps, rng, aug_counters[k]);
          if (timing) {
            const double h = h_at(x);
            for (auto& y : ys) y -= h;
          }
          return ys;
        };
        problem.candidate_key = StreamKey{seed, date, Purpose::Candidates};
        problem.fit = opts;
        {
          // Sub-stream n_final is never used for candidates.
          Rng ref_rng = problem.candidate_key.stream(cfg.sites);
          const std::size_t n_ref = cfg.sequential.candidates > 0 ? cfg.sequential.candidates : 100 * dim;
          problem.reference = lhs(n_ref, cfg.domain, ref_rng);
        }
        SequentialResult sr = grow_design(std::move(fr), std::move(design), cfg.sites,
                                          cfg.sequential, problem);
        for (const auto& c : aug_counters) counters += c;
        fitted = std::make_unique<KrigingModel>(std::move(sr.model));
        diag.fit = sr.report;
        design = std::move(sr.design);
        diag.trace = std::move(sr.trace);
      } else {
        fitted = std::make_unique<KrigingModel>(std::move(fr.model));
        diag.fit = fr.report;
      }
    } catch (const FitFailure& e) {
      throw DateFitFailure(date, e.what());
    }

    auto surface = std::make_shared<KrigingContinuation>(std::move(*fitted), contract, t,
                                                         regression.response);
    run.policy.set_surface(date, surface);

    // Diagnostics in continuation-value units.
    const std::size_t nd = design.size();
    diag.h.resize(static_cast<Eigen::Index>(nd));
    for (std::size_t i = 0; i < nd; ++i) {
      std::span<const double> x{&design.sites(0, static_cast<Eigen::Index>(i)), dim};
      diag.h[static_cast<Eigen::Index>(i)] = h_at(x);
    }
    if (timing) design.means += diag.h;
    surface->model().predict(design.sites, diag.m, diag.v);
    if (timing) diag.m += diag.h;
    diag.v = diag.v.array().sqrt().matrix();
    diag.loss = integrated_loss(run.policy, date, design.sites, density);
    diag.design = std::move(design);
    diag.sims = counters;
    run.sims += counters;
  }
  return run;
}

Valuation out_of_sample_value(const StoppingPolicy& policy, const MarketModel& model,
                              std::span<const double> x0, std::size_t n_out, std::uint64_t seed) {
  if (n_out < 1) throw std::invalid_argument("out-of-sample: n_out must be >= 1");
  if (x0.size() != model.dim()) throw std::invalid_argument("out-of-sample: x0 dimension mismatch");
  const StreamKey key{seed, 0, Purpose::OutOfSample};
  std::vector<double> values(n_out);
  std::vector<SimCounters> counters(n_out);
  parallel_for(n_out, [&](std::size_t i) {
    Rng rng = key.stream(i);
    values[i] = sample_payoff(policy, model, 0, x0, rng, counters[i]);
  });
  Valuation v;
  v.paths = n_out;
  double sum = 0.0;
  for (double y : values) sum += y;
  v.mean = sum / static_cast<double>(n_out);
  double ss = 0.0;
  for (double y : values) ss += (y - v.mean) * (y - v.mean);
  v.se = n_out > 1 ? std::sqrt(ss / static_cast<double>(n_out - 1) / static_cast<double>(n_out)) : 0.0;
  v.value = std::max(payoff(policy.contract(), 0.0, x0), v.mean);
  for (const auto& c : counters) v.sims += c;
  return v;
}

void write_date_csv(std::ostream& os, const DateDiagnostics& d) {
  const std::size_t dim = d.design.dim();
  for (std::size_t j = 0; j < dim; ++j) os << 'x' << (j + 1) << ',';
  os << "mean,variance,reps,m,v,h,loss,weight\n";
  os.precision(10);
  for (std::size_t i = 0; i < d.design.size(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < dim; ++j) os << d.design.sites(static_cast<Eigen::Index>(j), ii) << ',';
    os << d.design.means[ii] << ',' << d.design.variances[ii] << ',' << d.design.reps[ii] << ','
       << d.m[ii] << ',' << d.v[ii] << ',' << d.h[ii] << ',' << d.loss.loss[i] << ','
       << d.loss.weight[i] << '\n';
  }
}

}  // namespace rmc
