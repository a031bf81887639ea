#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rmc/contracts.hpp"
#include "rmc/kriging.hpp"
#include "rmc/market_models.hpp"

namespace rmc {

// Estimated continuation value C(t, .) at one exercise date.
class ContinuationSurface {
 public:
  virtual ~ContinuationSurface() = default;
  virtual double continuation(std::span<const double> x) const = 0;
  // Posterior of C(t, x); regression surfaces report zero variance.
  virtual Prediction predict(std::span<const double> x) const {
    return {continuation(x), 0.0};
  }
};

// What the Gaussian process is fitted to at each site.
//   continuation: the batch mean of H_t
//   timing:       the batch mean of H_t minus h(t, x), so C = h + m
enum class Response { Continuation, Timing };

Response parse_response(const std::string& name);
std::string to_string(Response r);

class KrigingContinuation : public ContinuationSurface {
 public:
  KrigingContinuation(KrigingModel model, ContractSpec contract, double t, Response response);

  double continuation(std::span<const double> x) const override;
  Prediction predict(std::span<const double> x) const override;

  const KrigingModel& model() const { return model_; }
  Response response() const { return response_; }

 private:
  KrigingModel model_;
  ContractSpec contract_;
  double t_;
  Response response_;
};

// Per-date surrogates defining S_t = {x : h(t,x) > 0 and C(t,x) <= h(t,x)};
// S_T is the whole space.
class StoppingPolicy {
 public:
  StoppingPolicy(ContractSpec contract, TimeGrid grid);

  const ContractSpec& contract() const { return contract_; }
  const TimeGrid& grid() const { return grid_; }

  // date in 1..n_exercise-1
  void set_surface(int date, std::shared_ptr<const ContinuationSurface> surface);
  const ContinuationSurface* surface(int date) const;

 private:
  ContractSpec contract_;
  TimeGrid grid_;
  std::vector<std::shared_ptr<const ContinuationSurface>> surfaces_;
};

// Throws std::out_of_range for dates off the grid and std::logic_error for an
// interior date without a surface.
bool in_stopping_set(const StoppingPolicy& policy, int date, std::span<const double> x);

// h(tau, X_tau) along a stored path, tau = first date s > t in S_s. The path
// array must hold every date t+1..T.
double pathwise_payoff(const StoppingPolicy& policy, int t, const PathArray& paths,
                       std::size_t path);

// Same, simulating the path lazily from (t, x) and stopping the simulation at
// tau. Only the transitions actually simulated are counted.
double sample_payoff(const StoppingPolicy& policy, const MarketModel& model, int t,
                     std::span<const double> x, Rng& rng, SimCounters& counters);

// Expected cost of misranking C against h under C ~ N(m, v^2):
//   v phi(-d/v) - d Phi(-d/v),  d = |m - h|.
double local_loss(double m, double v, double h);

struct LossReport {
  std::vector<double> loss;    // per site
  std::vector<double> weight;  // p(t, x | 0, X0) per site
  double integrated = 0.0;     // mean of loss * weight
};

LossReport integrated_loss(const StoppingPolicy& policy, int date, const Eigen::MatrixXd& sites,
                           const TransitionDensity& density);

}  // namespace rmc
