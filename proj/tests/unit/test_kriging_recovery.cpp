#include <doctest.h>

#include <cmath>
#include <random>

#include "rmc/kriging.hpp"

using namespace rmc;

// Draws from a known squared-exponential GP on [0, 40] and checks that the
// fitted length-scale lands within a factor 1.5 of the truth.
TEST_CASE("length-scale recovery on synthetic GP draws") {
  const int n = 200, seeds = 50;
  const double s2 = 1.0, theta = 4.0, sigma = 0.1;
  int hits = 0;
  for (int seed = 1; seed <= seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(0.0, 40.0);
    std::normal_distribution<double> z;
    Eigen::MatrixXd s(1, n);
    for (int i = 0; i < n; ++i) s(0, i) = u(rng);
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) k(i, j) = s2 * std::exp(-0.5 * std::pow((s(0, i) - s(0, j)) / theta, 2));
    k.diagonal().array() += 1e-10;
    const Eigen::MatrixXd l = k.llt().matrixL();
    Eigen::VectorXd e(n), w(n);
    for (int i = 0; i < n; ++i) e[i] = z(rng);
    for (int i = 0; i < n; ++i) w[i] = sigma * z(rng);
    const Eigen::VectorXd y = l * e + w;
    FitOptions opt;
    opt.family = KernelFamily::SquaredExponential;
    opt.seed = static_cast<std::uint64_t>(seed);
    const FitResult r = fit(s, y, Eigen::VectorXd::Constant(n, sigma * sigma), false, opt);
    const double ratio = r.model.kernel().lengthscales[0] / theta;
    if (ratio >= 1.0 / 1.5 && ratio <= 1.5) ++hits;
  }
  MESSAGE("recovered in " << hits << " of " << seeds);
  CHECK(hits >= 45);
}
