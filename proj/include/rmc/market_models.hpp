#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "rmc/random.hpp"

namespace rmc {

using State = std::vector<double>;

// Independent geometric Brownian motions, one per coordinate.
struct GbmParams {
  double r = 0.0;
  double delta = 0.0;
  std::vector<double> sigma;  // per-coordinate volatility
  std::vector<double> x0;

  std::size_t dim() const { return sigma.size(); }
  void validate() const;
};

// Price X1 with log-volatility X2 following a mean-reverting OU process.
struct SvParams {
  double r = 0.0;
  double a = 0.0;    // mean-reversion rate
  double m1 = 0.0;   // log-vol base level
  double nu = 0.0;   // vol of log-vol
  double rho = 0.0;  // correlation of the two Brownian drivers
  std::array<double, 2> x0{};
  double euler_dt = 0.0;

  void validate(double exercise_dt) const;
};

struct TimeGrid {
  double maturity = 1.0;
  int n_exercise = 1;

  double dt() const { return maturity / n_exercise; }
  double date(int k) const { return k * dt(); }
  void validate() const;
};

// Smallest price an Euler step may produce; lower values are clamped.
inline constexpr double kPriceFloor = 1e-8;

struct SimCounters {
  std::uint64_t transitions = 0;  // one-step simulations (Euler sub-steps count individually)
  std::uint64_t clamps = 0;       // Euler prices clamped at kPriceFloor

  SimCounters& operator+=(const SimCounters& o) {
    transitions += o.transitions;
    clamps += o.clamps;
    return *this;
  }
};

// Exact lognormal step of every coordinate over dt.
State gbm_step(std::span<const double> x, const GbmParams& p, double dt,
               std::span<const double> z);

struct SvStepResult {
  std::array<double, 2> state;
  bool clamped = false;
};

// One Euler step of length p.euler_dt; z must already carry correlation rho.
SvStepResult sv_step(std::array<double, 2> x, const SvParams& p,
                     std::array<double, 2> z);

// (z1, rho*z1 + sqrt(1-rho^2)*zeta)
std::array<double, 2> correlated_pair(double z1, double zeta, double rho);

class MarketModel {
 public:
  MarketModel(GbmParams p, TimeGrid grid);
  MarketModel(SvParams p, TimeGrid grid);

  std::size_t dim() const;
  const TimeGrid& grid() const { return grid_; }
  double rate() const;
  std::span<const double> x0() const;
  bool is_gbm() const { return std::holds_alternative<GbmParams>(params_); }
  const GbmParams& gbm() const { return std::get<GbmParams>(params_); }
  const SvParams& sv() const { return std::get<SvParams>(params_); }

  // Euler sub-steps per exercise interval (1 for GBM).
  int substeps() const { return substeps_; }

  // Moves x forward by one exercise interval.
  void advance(std::span<double> x, Rng& rng, SimCounters& counters) const;

 private:
  std::variant<GbmParams, SvParams> params_;
  TimeGrid grid_;
  int substeps_ = 1;
};

// n trajectories sampled at every exercise date from t0 to T.
// Layout: path-major, then date, then coordinate.
class PathArray {
 public:
  PathArray() = default;
  PathArray(std::size_t n_paths, int first_date, int n_dates, std::size_t dim)
      : n_paths_(n_paths), first_date_(first_date), n_dates_(n_dates), dim_(dim),
        data_(n_paths * static_cast<std::size_t>(n_dates) * dim) {}

  std::size_t size() const { return n_paths_; }
  bool empty() const { return n_paths_ == 0; }
  int first_date() const { return first_date_; }
  int n_dates() const { return n_dates_; }
  std::size_t dim() const { return dim_; }

  std::span<double> state(std::size_t path, int date) {
    return {data_.data() + offset(path, date), dim_};
  }
  std::span<const double> state(std::size_t path, int date) const {
    return {data_.data() + offset(path, date), dim_};
  }
  // All dates of one path, contiguous.
  std::span<const double> path(std::size_t i) const {
    return {data_.data() + offset(i, first_date_), static_cast<std::size_t>(n_dates_) * dim_};
  }

 private:
  std::size_t offset(std::size_t path, int date) const {
    return (path * static_cast<std::size_t>(n_dates_) +
            static_cast<std::size_t>(date - first_date_)) * dim_;
  }

  std::size_t n_paths_ = 0;
  int first_date_ = 0;
  int n_dates_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Path i draws from key.stream(i), so a path does not depend on n or on
// the thread count.
PathArray simulate_paths(const MarketModel& model, int t0, std::span<const double> x0,
                         std::size_t n, const StreamKey& key,
                         SimCounters* counters = nullptr);

// Closed-form density of X_t given X_0 = x0: product of lognormals.
double gbm_transition_density(const GbmParams& p, double t, std::span<const double> x,
                              std::span<const double> x0);

// p(t_k, x | 0, x0) on the exercise dates. GBM is exact; SV uses a
// Gaussian-product kernel density estimate over pilot paths (Silverman
// bandwidth), built once per date.
class TransitionDensity {
 public:
  TransitionDensity(const MarketModel& model, std::span<const double> x0,
                    std::uint64_t pilot_seed = 0, std::size_t pilot_paths = 10000);

  double operator()(int date, std::span<const double> x) const;

 private:
  struct Kde {
    std::vector<double> points;  // n x dim
    std::vector<double> bandwidth;
    double norm = 0.0;
  };

  MarketModel model_;
  State x0_;
  std::vector<Kde> kde_;  // indexed by date (SV only)
};

}  // namespace rmc
