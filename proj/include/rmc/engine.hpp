#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rmc/contracts.hpp"
#include "rmc/design.hpp"
#include "rmc/kriging.hpp"
#include "rmc/market_models.hpp"
#include "rmc/policy.hpp"
#include "rmc/sequential.hpp"

namespace rmc {

enum class DesignKind { Lhs, Sobol, Halton, Grid, Probabilistic, Sequential };

DesignKind parse_design_kind(const std::string& name);
std::string to_string(DesignKind k);

struct DesignConfig {
  DesignKind kind = DesignKind::Lhs;
  std::size_t sites = 30;  // N'
  int reps = 100;          // M per site
  DesignDomain domain;     // unused by probabilistic designs
  bool itm_filter = true;  // probabilistic designs only
  // Adaptive batches: M(x) = ceil(pilot variance / target_variance) from a
  // pilot batch of pilot_reps, never below the pilot.
  bool adaptive_reps = false;
  double target_variance = 0.0;
  int pilot_reps = 10;
  SequentialConfig sequential;

  void validate(std::size_t dim) const;
};

struct RegressionConfig {
  FitOptions fit;
  Response response = Response::Continuation;
};

// Fit failure tagged with the exercise date that failed.
class DateFitFailure : public FitFailure {
 public:
  DateFitFailure(int date, const std::string& what);
  int date() const { return date_; }

 private:
  int date_;
};

struct DateDiagnostics {
  int date = 0;
  double time = 0.0;
  Design design;
  Eigen::VectorXd m;  // surrogate continuation mean at the sites
  Eigen::VectorXd v;  // surrogate sd at the sites
  Eigen::VectorXd h;  // payoff at the sites
  LossReport loss;
  FitReport fit;
  SimCounters sims;
  std::vector<SequentialStep> trace;  // sequential designs only
};

struct PolicyRun {
  StoppingPolicy policy;
  std::vector<DateDiagnostics> dates;  // ascending dates last_date..n-1
  SimCounters sims;
};

// Backward induction over t = T - dt, ..., dt with a fresh design per date.
// last_date > 1 stops early (dates below it keep no surface or diagnostics).
PolicyRun backward_induction(const MarketModel& model, const ContractSpec& contract,
                             const DesignConfig& design, const RegressionConfig& regression,
                             std::uint64_t seed, int last_date = 1);

struct Valuation {
  double value = 0.0;  // max(h(0, X0), mean)
  double mean = 0.0;   // mean of H_0
  double se = 0.0;
  std::size_t paths = 0;
  SimCounters sims;
};

// Plain i.i.d. paths from x0; path i always uses the same sub-stream so one
// seed defines a fixed path database shared by every policy.
Valuation out_of_sample_value(const StoppingPolicy& policy, const MarketModel& model,
                              std::span<const double> x0, std::size_t n_out, std::uint64_t seed);

// Header: x1..xd,mean,variance,reps,m,v,h,loss,weight
void write_date_csv(std::ostream& os, const DateDiagnostics& d);

}  // namespace rmc
