#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmc/contracts.hpp"
#include "rmc/market_models.hpp"
#include "rmc/policy.hpp"

namespace rmc {

struct BasisSpec {
  enum class Kind { Polynomial, Partition };
  Kind kind = Kind::Polynomial;
  int degree = 3;        // polynomial: total degree (or per-coordinate degree when tensor)
  bool tensor = false;   // polynomial: full tensor product instead of total degree
  bool itm_only = true;  // polynomial: regress in-the-money paths only
  int cells = 10;        // partition: slices per dimension

  void validate() const;
};

// Monomials in standardized coordinates.
class PolynomialRegression : public ContinuationSurface {
 public:
  PolynomialRegression() = default;
  std::size_t terms() const { return exponents_.size(); }
  const Eigen::VectorXd& coefficients() const { return beta_; }
  bool ridge_used() const { return ridge_; }
  double continuation(std::span<const double> x) const override;

  friend PolynomialRegression ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      int degree, bool tensor);
  // Basis evaluated at the columns of x (n x terms).
  Eigen::MatrixXd basis(const Eigen::MatrixXd& x) const;

 private:
  std::vector<std::vector<int>> exponents_;
  Eigen::VectorXd center_;
  Eigen::VectorXd scale_;
  Eigen::VectorXd beta_;
  bool ridge_ = false;
};

// Least squares on the polynomial basis (columns of x are points). Rank
// deficiency falls back to a ridge solve with penalty 1e-8 and sets
// ridge_used().
PolynomialRegression ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int degree,
                             bool tensor = false);

// Equi-probable rectangular cells built by successive quantile splits,
// coordinate 1 first, with a linear fit per cell.
class PartitionRegression : public ContinuationSurface {
 public:
  double continuation(std::span<const double> x) const override;
  std::size_t cells() const { return cells_.size(); }
  // Cell index of x.
  std::size_t locate(std::span<const double> x) const;
  // Sample points per cell from the fit.
  const std::vector<std::size_t>& occupancy() const { return occupancy_; }

  friend PartitionRegression bw11_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int r);

 private:
  struct Node {
    std::vector<double> cuts;     // r-1 cut points on this node's coordinate
    std::vector<std::size_t> kids;  // nodes (inner levels) or cells (last level)
  };
  struct Cell {
    Eigen::VectorXd beta;  // intercept then slopes; slopes empty for a mean-only cell
  };

  std::size_t dim_ = 0;
  std::vector<Node> nodes_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> occupancy_;
};

PartitionRegression bw11_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int r);

struct LsmcRun {
  StoppingPolicy policy;
  SimCounters sims;
  int ridge_fallbacks = 0;
};

// One global set of N paths from X0, regressing the realized pathwise payoff
// at each date backward from T.
LsmcRun lsmc_backward(const MarketModel& model, const ContractSpec& contract, std::size_t n_paths,
                      const BasisSpec& basis, std::uint64_t seed);

}  // namespace rmc
