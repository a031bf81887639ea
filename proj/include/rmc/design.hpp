#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rmc/contracts.hpp"
#include "rmc/market_models.hpp"
#include "rmc/random.hpp"

namespace rmc {

// Design sites, one per column (dim x n).
using Sites = Eigen::MatrixXd;

class DomainInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hyper-rectangle [lo, hi], optionally intersected with a predicate.
struct DesignDomain {
  std::vector<double> lo;
  std::vector<double> hi;
  std::function<bool(std::span<const double>)> constraint;

  std::size_t dim() const { return lo.size(); }
  bool contains(std::span<const double> x) const;
  void validate() const;
  // Throws DomainInfeasible if fewer than 1e-3 of 1e4 uniform pilot draws
  // satisfy the constraint.
  void check_feasible() const;
};

// Latin hypercube: per coordinate, one point in each of n equal strata.
// With a constraint, rejected points are topped up one at a time from fresh
// hypercubes until n points are accepted.
Sites lhs(std::size_t n, const DesignDomain& dom, Rng& rng);

// First n points of the sequence mapped affinely onto the box; constrained
// domains keep sequence order and take the first n accepted points.
Sites sobol(std::size_t n, const DesignDomain& dom);
Sites halton(std::size_t n, const DesignDomain& dom);

// Cell-centred lattice with ceil(n^(1/d)) points per axis; the first n
// accepted lattice points in lexicographic order.
Sites grid(std::size_t n, const DesignDomain& dom);

// n draws of X_date | X_0 = x0 by forward simulation. When itm_filter is
// given, draws are rejected until each satisfies h(t, x) > 0.
Sites probabilistic(std::size_t n, const MarketModel& model, int date,
                    std::span<const double> x0, const StreamKey& key,
                    const ContractSpec* itm_filter = nullptr,
                    SimCounters* counters = nullptr);

struct BatchStats {
  double mean = 0.0;
  std::optional<double> variance;  // absent when M = 1
};

// Single-pass (Welford) batch mean and unbiased variance.
BatchStats batch_stats(std::span<const double> y);

// Replication count giving a batch-mean variance near target_variance.
int adaptive_replications(double pilot_variance, double target_variance);

// Macro-design with per-site replication statistics.
struct Design {
  Sites sites;
  Eigen::VectorXd means;
  Eigen::VectorXd variances;  // empirical sigma-tilde^2
  Eigen::VectorXi reps;

  std::size_t size() const { return static_cast<std::size_t>(sites.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(sites.rows()); }
  // Noise of each batch mean, sigma-tilde^2 / M.
  Eigen::VectorXd mean_noise() const;
  int min_reps() const;
};

// Header: x1..xd,mean,variance,reps
void write_design_csv(std::ostream& os, const Design& d);

}  // namespace rmc
