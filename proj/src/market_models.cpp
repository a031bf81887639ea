#include "rmc/market_models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rmc/parallel.hpp"

namespace rmc {

void GbmParams::validate() const {
  if (sigma.empty()) throw std::invalid_argument("gbm: dimension must be at least 1");
  if (x0.size() != sigma.size())
    throw std::invalid_argument("gbm: x0 has " + std::to_string(x0.size()) +
                                " entries, expected " + std::to_string(sigma.size()));
  for (double s : sigma)
    if (!(s >= 0.0)) throw std::invalid_argument("gbm: sigma must be nonnegative");
  for (double v : x0)
    if (!(v > 0.0)) throw std::invalid_argument("gbm: x0 must be positive");
}

void SvParams::validate(double exercise_dt) const {
  if (!(a >= 0.0)) throw std::invalid_argument("sv: mean reversion a must be nonnegative");
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("sv: |rho| must be at most 1");
  if (!(nu >= 0.0)) throw std::invalid_argument("sv: nu must be nonnegative");
  if (!(x0[0] > 0.0)) throw std::invalid_argument("sv: initial price must be positive");
  if (!(euler_dt > 0.0)) throw std::invalid_argument("sv: euler_dt must be positive");
  if (euler_dt > exercise_dt * (1.0 + 1e-12))
    throw std::invalid_argument("sv: euler_dt exceeds the exercise spacing");
  const double ratio = exercise_dt / euler_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio)
    throw std::invalid_argument("sv: exercise spacing is not an integer multiple of euler_dt");
}

void TimeGrid::validate() const {
  if (!(maturity > 0.0)) throw std::invalid_argument("grid: maturity must be positive");
  if (n_exercise < 1) throw std::invalid_argument("grid: n_exercise must be at least 1");
}

State gbm_step(std::span<const double> x, const GbmParams& p, double dt,
               std::span<const double> z) {
  if (!(dt > 0.0)) throw std::invalid_argument("gbm_step: dt must be positive");
  if (x.size() != p.dim() || z.size() != p.dim())
    throw std::invalid_argument("gbm_step: dimension mismatch");
  State out(x.size());
  const double sqdt = std::sqrt(dt);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0)) throw std::invalid_argument("gbm_step: state must be positive");
    const double s = p.sigma[j];
    out[j] = x[j] * std::exp((p.r - p.delta - 0.5 * s * s) * dt + s * sqdt * z[j]);
  }
  return out;
}

std::array<double, 2> correlated_pair(double z1, double zeta, double rho) {
  return {z1, rho * z1 + std::sqrt(1.0 - rho * rho) * zeta};
}

SvStepResult sv_step(std::array<double, 2> x, const SvParams& p, std::array<double, 2> z) {
  const double dt = p.euler_dt;
  if (!(dt > 0.0)) throw std::invalid_argument("sv_step: euler_dt must be positive");
  if (!(x[0] > 0.0)) throw std::invalid_argument("sv_step: price must be positive");
  const double sqdt = std::sqrt(dt);
  SvStepResult res;
  res.state[0] = x[0] * (1.0 + p.r * dt + std::exp(x[1]) * sqdt * z[0]);
  res.state[1] = x[1] + p.a * (p.m1 - x[1]) * dt + p.nu * sqdt * z[1];
  if (!(res.state[0] > kPriceFloor)) {
    res.state[0] = kPriceFloor;
    res.clamped = true;
  }
  return res;
}

MarketModel::MarketModel(GbmParams p, TimeGrid grid) : params_(std::move(p)), grid_(grid) {
  grid_.validate();
  std::get<GbmParams>(params_).validate();
}

MarketModel::MarketModel(SvParams p, TimeGrid grid) : params_(std::move(p)), grid_(grid) {
  grid_.validate();
  const auto& sv = std::get<SvParams>(params_);
  sv.validate(grid_.dt());
  substeps_ = static_cast<int>(std::lround(grid_.dt() / sv.euler_dt));
}

std::size_t MarketModel::dim() const { return is_gbm() ? gbm().dim() : 2; }

double MarketModel::rate() const { return is_gbm() ? gbm().r : sv().r; }

std::span<const double> MarketModel::x0() const {
  if (is_gbm()) return gbm().x0;
  return sv().x0;
}

void MarketModel::advance(std::span<double> x, Rng& rng, SimCounters& counters) const {
  std::normal_distribution<double> normal;
  if (is_gbm()) {
    const auto& p = gbm();
    const double dt = grid_.dt();
    const double sqdt = std::sqrt(dt);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double s = p.sigma[j];
      x[j] *= std::exp((p.r - p.delta - 0.5 * s * s) * dt + s * sqdt * normal(rng));
    }
    counters.transitions += 1;
    return;
  }
  const auto& p = sv();
  std::array<double, 2> s{x[0], x[1]};
  for (int k = 0; k < substeps_; ++k) {
    const double z1 = normal(rng);
    const double zeta = normal(rng);
    const auto step = sv_step(s, p, correlated_pair(z1, zeta, p.rho));
    s = step.state;
    if (step.clamped) ++counters.clamps;
  }
  counters.transitions += static_cast<std::uint64_t>(substeps_);
  x[0] = s[0];
  x[1] = s[1];
}

PathArray simulate_paths(const MarketModel& model, int t0, std::span<const double> x0,
                         std::size_t n, const StreamKey& key, SimCounters* counters) {
  const int n_ex = model.grid().n_exercise;
  if (t0 < 0 || t0 > n_ex) throw std::invalid_argument("simulate_paths: t0 is not on the grid");
  if (x0.size() != model.dim()) throw std::invalid_argument("simulate_paths: x0 dimension mismatch");
  PathArray paths(n, t0, n_ex - t0 + 1, model.dim());
  std::vector<SimCounters> per_path(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng = key.stream(i);
    auto first = paths.state(i, t0);
    std::copy(x0.begin(), x0.end(), first.begin());
    for (int d = t0 + 1; d <= n_ex; ++d) {
      auto prev = paths.state(i, d - 1);
      auto cur = paths.state(i, d);
      std::copy(prev.begin(), prev.end(), cur.begin());
      model.advance(cur, rng, per_path[i]);
    }
  });
  if (counters)
    for (const auto& c : per_path) *counters += c;
  return paths;
}

double gbm_transition_density(const GbmParams& p, double t, std::span<const double> x,
                              std::span<const double> x0) {
  if (!(t > 0.0)) throw std::invalid_argument("transition density requires t > 0");
  double dens = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0)) return 0.0;
    const double s = p.sigma[j];
    if (s <= 0.0) return 0.0;
    const double var = s * s * t;
    const double mu = std::log(x0[j]) + (p.r - p.delta - 0.5 * s * s) * t;
    const double u = std::log(x[j]) - mu;
    dens *= std::exp(-0.5 * u * u / var) / (x[j] * std::sqrt(2.0 * std::numbers::pi * var));
  }
  return dens;
}

TransitionDensity::TransitionDensity(const MarketModel& model, std::span<const double> x0,
                                     std::uint64_t pilot_seed, std::size_t pilot_paths)
    : model_(model), x0_(x0.begin(), x0.end()) {
  if (model_.is_gbm()) return;
  const std::size_t dim = model_.dim();
  const int n_ex = model_.grid().n_exercise;
  const PathArray pilot =
      simulate_paths(model_, 0, x0_, pilot_paths, StreamKey{pilot_seed, 0, Purpose::Pilot});
  kde_.resize(static_cast<std::size_t>(n_ex) + 1);
  const double n = static_cast<double>(pilot_paths);
  const double silverman = std::pow(4.0 / ((dim + 2.0) * n), 1.0 / (dim + 4.0));
  for (int d = 1; d <= n_ex; ++d) {
    Kde& k = kde_[d];
    k.points.resize(pilot_paths * dim);
    k.bandwidth.assign(dim, 0.0);
    std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
    for (std::size_t i = 0; i < pilot_paths; ++i) {
      auto s = pilot.state(i, d);
      for (std::size_t j = 0; j < dim; ++j) {
        k.points[i * dim + j] = s[j];
        mean[j] += s[j];
      }
    }
    for (std::size_t j = 0; j < dim; ++j) mean[j] /= n;
    for (std::size_t i = 0; i < pilot_paths; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        const double u = k.points[i * dim + j] - mean[j];
        sq[j] += u * u;
      }
    k.norm = 1.0 / n;
    for (std::size_t j = 0; j < dim; ++j) {
      const double sd = std::sqrt(sq[j] / (n - 1.0));
      k.bandwidth[j] = std::max(sd * silverman, 1e-12);
      k.norm /= k.bandwidth[j] * std::sqrt(2.0 * std::numbers::pi);
    }
  }
}

double TransitionDensity::operator()(int date, std::span<const double> x) const {
  if (date < 1 || date > model_.grid().n_exercise)
    throw std::invalid_argument("transition density requires a positive exercise date");
  if (model_.is_gbm()) return gbm_transition_density(model_.gbm(), model_.grid().date(date), x, x0_);
  const Kde& k = kde_[static_cast<std::size_t>(date)];
  const std::size_t dim = k.bandwidth.size();
  const std::size_t n = k.points.size() / dim;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double u = (x[j] - k.points[i * dim + j]) / k.bandwidth[j];
      q += u * u;
    }
    if (q < 80.0) sum += std::exp(-0.5 * q);
  }
  return sum * k.norm;
}

}  // namespace rmc
