#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rmc/design.hpp"

namespace rmc {

enum class KernelFamily { SquaredExponential, Matern52, Matern32 };

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily f);

// Stationary covariance s2 * g(rho) with rho^2 = sum_j ((x_j - x'_j) / theta_j)^2.
// theta_j is a length-scale: smaller means rougher.
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern52;
  double s2 = 1.0;
  std::vector<double> lengthscales;

  std::size_t dim() const { return lengthscales.size(); }
  void validate() const;
  double operator()(std::span<const double> x, std::span<const double> y) const;
  // Covariance as a function of the scaled distance rho.
  double of_distance(double rho) const;
};

inline double kernel_eval(const KernelSpec& k, std::span<const double> x,
                          std::span<const double> y) {
  return k(x, y);
}

class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
  double sd() const;
};

// Zero-mean Gaussian-process posterior given noisy observations y at the
// sites with independent noise variances on the diagonal.
class KrigingModel {
 public:
  // Prior only (no data).
  KrigingModel(KernelSpec kernel, std::size_t dim);
  KrigingModel(KernelSpec kernel, Eigen::MatrixXd sites, Eigen::VectorXd y,
               Eigen::VectorXd noise);

  std::size_t size() const { return static_cast<std::size_t>(sites_.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(sites_.rows()); }
  const KernelSpec& kernel() const { return kernel_; }
  const Eigen::MatrixXd& sites() const { return sites_; }
  const Eigen::VectorXd& responses() const { return y_; }
  const Eigen::VectorXd& noise() const { return noise_; }
  // Extra diagonal term that was needed to factorize K + Sigma.
  double jitter() const { return jitter_; }

  double mean(std::span<const double> x) const;
  Prediction predict(std::span<const double> x) const;
  // Means and variances at every column of points.
  void predict(const Eigen::MatrixXd& points, Eigen::VectorXd& mean, Eigen::VectorXd& var) const;
  double posterior_cov(std::span<const double> x, std::span<const double> y) const;

  // Adds one observation with the kernel frozen; extends the Cholesky
  // factor by one row, O(n^2).
  KrigingModel update(std::span<const double> x_new, double y_new, double noise_new) const;

  // Drop in posterior sd at x_new if an observation with this noise were
  // added there: v * (1 - sigma / sqrt(sigma^2 + v^2)). The model's jitter
  // counts as part of the noise.
  double variance_reduction(std::span<const double> x_new, double noise_new) const;

  // Gaussian marginal log-likelihood of the responses.
  double log_likelihood() const;

 private:
  KrigingModel() = default;
  Eigen::VectorXd cross_cov(std::span<const double> x) const;
  void factorize();

  KernelSpec kernel_;
  Eigen::MatrixXd sites_;
  Eigen::VectorXd y_;
  Eigen::VectorXd noise_;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;  // lower triangular
  Eigen::VectorXd alpha_;
};

enum class NoiseMode { Empirical, HomoscedasticMle };

NoiseMode parse_noise_mode(const std::string& name);
std::string to_string(NoiseMode m);

struct FitOptions {
  KernelFamily family = KernelFamily::Matern52;
  NoiseMode noise = NoiseMode::Empirical;
  // Hyperparameters to freeze instead of estimating (family taken from here).
  std::optional<KernelSpec> fixed;
  int starts = 5;
  int max_iterations = 200;
  double tolerance = 1e-6;
  // Empirical noise needs at least this many replicates per site.
  int min_reps_empirical = 20;
  std::uint64_t seed = 0;
};

struct FitReport {
  NoiseMode noise_used = NoiseMode::Empirical;
  double nugget = 0.0;  // homoscedastic noise (0 in empirical mode)
  double initial_log_likelihood = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct FitResult {
  KrigingModel model;
  FitReport report;
};

// Maximum-likelihood fit of (s2, theta) and, in homoscedastic mode, the
// nugget. Multi-start projected quasi-Newton on log-parameters inside
//   theta_j in [1e-2, 1e2] * width_j,  s2 in [1e-6, 1e2] * var(y).
FitResult fit(const Design& design, const FitOptions& options);
FitResult fit(const Eigen::MatrixXd& sites, const Eigen::VectorXd& y,
              const Eigen::VectorXd& noise, bool homoscedastic, const FitOptions& options);

// Log-likelihood and its gradient with respect to
// (log s2, log theta_1..d[, log nugget]).
struct LikelihoodValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};
LikelihoodValue log_likelihood_gradient(KernelFamily family, const Eigen::MatrixXd& sites,
                                        const Eigen::VectorXd& y, const Eigen::VectorXd& noise,
                                        const Eigen::VectorXd& log_params, bool with_nugget);

// {"kernel": {"family", "s2", "lengthscales"}, "sites": [[...]...],
//  "responses": [...], "noise": [...]}
nlohmann::json to_json(const KrigingModel& m);
KrigingModel kriging_from_json(const nlohmann::json& j);

}  // namespace rmc
