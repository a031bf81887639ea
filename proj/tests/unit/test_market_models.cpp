#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../oracles/quadrature.hpp"
#include "rmc/market_models.hpp"
#include "rmc/parallel.hpp"

using namespace rmc;

namespace {

GbmParams put_params() { return GbmParams{0.06, 0.0, {0.2}, {40.0}}; }

SvParams sv_params() {
  return SvParams{0.0225, 0.015, 2.95, 3.0 / std::sqrt(2.0), -0.03, {90.0, std::log(0.35)}, 1.0 / 2520};
}

}  // namespace

TEST_CASE("gbm_step with a zero draw is pure drift") {
  const auto p = put_params();
  const double z[] = {0.0};
  const double x[] = {40.0};
  const State y = gbm_step(x, p, 0.04, z);
  CHECK(y[0] == doctest::Approx(40.0 * std::exp(0.0016)).epsilon(1e-14));
  CHECK(y[0] == doctest::Approx(40.0640).epsilon(1e-5));
}

TEST_CASE("gbm_step without volatility ignores the draw") {
  GbmParams p{0.05, 0.02, {0.0, 0.0}, {1.0, 1.0}};
  const double x[] = {10.0, 20.0};
  const double z[] = {3.0, -2.0};
  const State y = gbm_step(x, p, 0.5, z);
  CHECK(y[0] == doctest::Approx(10.0 * std::exp(0.03 * 0.5)));
  CHECK(y[1] == doctest::Approx(20.0 * std::exp(0.03 * 0.5)));
}

TEST_CASE("gbm_step rejects nonpositive inputs") {
  const auto p = put_params();
  const double z[] = {0.0};
  const double bad[] = {0.0};
  const double good[] = {40.0};
  CHECK_THROWS_AS(gbm_step(bad, p, 0.04, z), std::invalid_argument);
  CHECK_THROWS_AS(gbm_step(good, p, 0.0, z), std::invalid_argument);
  CHECK_THROWS_AS(gbm_step(good, p, -1.0, z), std::invalid_argument);
}

TEST_CASE("gbm_step mean matches the forward within 3 standard errors") {
  const auto p = put_params();
  Rng rng(11);
  std::normal_distribution<double> n01;
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  const double x[] = {40.0};
  for (int i = 0; i < n; ++i) {
    const double z[] = {n01(rng)};
    const double y = gbm_step(x, p, 0.04, z)[0];
    s += y;
    ss += y * y;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  CHECK(std::abs(mean - 40.0 * std::exp(0.06 * 0.04)) < 3.0 * se);
}

TEST_CASE("sv_step holds the log-vol at its base level for zero draws") {
  auto p = sv_params();
  const auto r = sv_step({90.0, p.m1}, p, {0.0, 0.0});
  CHECK(r.state[1] == p.m1);
  CHECK(r.state[0] == doctest::Approx(90.0 * (1.0 + p.r * p.euler_dt)));
}

TEST_CASE("sv_step freezes the log-vol without reversion or vol-of-vol") {
  auto p = sv_params();
  p.a = 0.0;
  p.nu = 0.0;
  for (double z2 : {-3.0, 0.5, 4.0}) CHECK(sv_step({90.0, -1.0}, p, {0.3, z2}).state[1] == -1.0);
}

TEST_CASE("sv_step validates and clamps") {
  auto p = sv_params();
  p.euler_dt = 0.0;
  CHECK_THROWS_AS(sv_step({90.0, 0.0}, p, {0.0, 0.0}), std::invalid_argument);
  p = sv_params();
  p.euler_dt = 0.1;
  const auto r = sv_step({1.0, 3.0}, p, {-10.0, 0.0});
  CHECK(r.clamped);
  CHECK(r.state[0] == kPriceFloor);
}

TEST_CASE("correlated pair has the requested correlation") {
  const auto z = correlated_pair(1.0, 0.0, -0.3);
  CHECK(z[0] == 1.0);
  CHECK(z[1] == doctest::Approx(-0.3));
  Rng rng(5);
  std::normal_distribution<double> n01;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const auto q = correlated_pair(n01(rng), n01(rng), 0.6);
    sxy += q[0] * q[1];
    sxx += q[0] * q[0];
    syy += q[1] * q[1];
  }
  CHECK(sxy / std::sqrt(sxx * syy) == doctest::Approx(0.6).epsilon(0.01));
}

TEST_CASE("SV log-vol mean follows the OU closed form") {
  auto p = sv_params();
  p.a = 2.0;
  p.m1 = -1.0;
  p.x0 = {100.0, -2.0};
  p.euler_dt = 0.01;
  const MarketModel m(p, TimeGrid{0.5, 5});
  const std::size_t n = 100000;
  const PathArray paths = simulate_paths(m, 0, m.x0(), n, StreamKey{3, 0, Purpose::Pilot});
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = paths.state(i, 5)[1];
    s += v;
    ss += v * v;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  // Euler is exact in mean for k steps: m1 + (x0 - m1)(1 - a dt)^k
  const int k = 50;
  const double euler = -1.0 + (-2.0 + 1.0) * std::pow(1.0 - 2.0 * 0.01, k);
  const double exact = -1.0 + (-2.0 + 1.0) * std::exp(-2.0 * 0.5);
  CHECK(std::abs(mean - euler) < 3.0 * se);
  CHECK(std::abs(mean - exact) < 3.0 * se + std::abs(euler - exact));
}

TEST_CASE("SV sub-steps per exercise interval") {
  const MarketModel m(sv_params(), TimeGrid{50.0 / 252, 50});
  CHECK(m.substeps() == 10);
  SimCounters c;
  Rng rng(1);
  std::vector<double> x(m.x0().begin(), m.x0().end());
  m.advance(x, rng, c);
  CHECK(c.transitions == 10);
  auto bad = sv_params();
  bad.euler_dt = 0.3 / 252;
  CHECK_THROWS_AS(MarketModel(bad, TimeGrid{50.0 / 252, 50}), std::invalid_argument);
  bad.euler_dt = 2.0 / 252;
  CHECK_THROWS_AS(MarketModel(bad, TimeGrid{50.0 / 252, 50}), std::invalid_argument);
}

TEST_CASE("simulate_paths edge cases and determinism") {
  const MarketModel m(put_params(), TimeGrid{1.0, 25});
  CHECK(simulate_paths(m, 0, m.x0(), 0, StreamKey{1, 0, Purpose::Design}).empty());
  const auto a = simulate_paths(m, 3, m.x0(), 50, StreamKey{9, 3, Purpose::Design});
  const auto b = simulate_paths(m, 3, m.x0(), 50, StreamKey{9, 3, Purpose::Design});
  CHECK(a.first_date() == 3);
  CHECK(a.n_dates() == 23);
  for (std::size_t i = 0; i < 50; ++i)
    for (int d = 3; d <= 25; ++d) CHECK(a.state(i, d)[0] == b.state(i, d)[0]);
  CHECK_THROWS_AS(simulate_paths(m, 26, m.x0(), 1, StreamKey{}), std::invalid_argument);
}

TEST_CASE("simulate_paths is independent of the thread count") {
  const MarketModel m(GbmParams{0.05, 0.1, {0.2, 0.2, 0.2}, {90, 90, 90}}, TimeGrid{3.0, 9});
  const unsigned before = thread_count();
  set_thread_count(1);
  const auto a = simulate_paths(m, 0, m.x0(), 300, StreamKey{4, 0, Purpose::GlobalPaths});
  set_thread_count(4);
  const auto b = simulate_paths(m, 0, m.x0(), 300, StreamKey{4, 0, Purpose::GlobalPaths});
  set_thread_count(before);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.state(i, 9)[j] == b.state(i, 9)[j]);
}

TEST_CASE("GBM terminal and log moments") {
  const GbmParams p{0.06, 0.01, {0.2}, {40.0}};
  const MarketModel m(p, TimeGrid{1.0, 25});
  const std::size_t n = 100000;
  SimCounters c;
  const auto paths = simulate_paths(m, 5, m.x0(), n, StreamKey{21, 5, Purpose::OutOfSample}, &c);
  CHECK(c.transitions == n * 20);
  double s = 0, ss = 0, ls = 0, lss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = paths.state(i, 25)[0];
    s += x;
    ss += x * x;
    const double l = std::log(x / 40.0);
    ls += l;
    lss += l * l;
  }
  const double tau = 0.8;
  const double mean = s / n;
  CHECK(std::abs(mean - 40.0 * std::exp(0.05 * tau)) < 3.0 * std::sqrt((ss / n - mean * mean) / n));
  const double lm = ls / n;
  const double lv = lss / n - lm * lm;
  const double mu = (0.05 - 0.02) * tau;
  const double var = 0.04 * tau;
  CHECK(std::abs(lm - mu) < 4.0 * std::sqrt(var / n));
  CHECK(std::abs(lv - var) < 4.0 * var * std::sqrt(2.0 / n));
}

TEST_CASE("GBM transition density") {
  const GbmParams p1{0.06, 0.0, {0.2}, {40.0}};
  const GbmParams p2{0.06, 0.0, {0.2, 0.3}, {40.0, 50.0}};
  SUBCASE("integrates to one") {
    const double x0[] = {40.0};
    const double integral = oracle::simpson(
        [&](double u) {
          const double x[] = {u};
          return gbm_transition_density(p1, 0.6, x, x0);
        },
        1e-6, 200.0, 200000);
    CHECK(std::abs(integral - 1.0) < 1e-4);
  }
  SUBCASE("product over independent coordinates") {
    const double x[] = {37.0, 55.0};
    const double a[] = {37.0};
    const double b[] = {55.0};
    const double x01[] = {40.0};
    const double x02[] = {50.0};
    const GbmParams q1{0.06, 0.0, {0.2}, {40.0}};
    const GbmParams q2{0.06, 0.0, {0.3}, {50.0}};
    CHECK(gbm_transition_density(p2, 0.5, x, p2.x0) ==
          doctest::Approx(gbm_transition_density(q1, 0.5, a, x01) *
                          gbm_transition_density(q2, 0.5, b, x02)));
  }
  SUBCASE("symmetric in log space around the drifted mean") {
    const double t = 0.6;
    const double c = std::log(40.0) + (0.06 - 0.02) * t;
    const double x0[] = {40.0};
    for (double e : {0.05, 0.2, 0.4}) {
      const double u[] = {std::exp(c + e)};
      const double l[] = {std::exp(c - e)};
      // Density of log X is symmetric; the density of X carries the 1/x Jacobian.
      CHECK(gbm_transition_density(p1, t, u, x0) * u[0] ==
            doctest::Approx(gbm_transition_density(p1, t, l, x0) * l[0]).epsilon(1e-12));
    }
  }
  SUBCASE("zero off the positive orthant") {
    const double x[] = {-1.0};
    const double z[] = {0.0};
    CHECK(gbm_transition_density(p1, 0.5, x, p1.x0) == 0.0);
    CHECK(gbm_transition_density(p1, 0.5, z, p1.x0) == 0.0);
  }
  SUBCASE("class wrapper uses the grid date") {
    const MarketModel m(p1, TimeGrid{1.0, 25});
    const TransitionDensity dens(m, m.x0());
    const double x[] = {38.0};
    CHECK(dens(15, x) == doctest::Approx(gbm_transition_density(p1, 0.6, x, p1.x0)));
  }
}

TEST_CASE("SV density estimate is a nonnegative probability density") {
  auto p = sv_params();
  const MarketModel m(p, TimeGrid{10.0 / 252, 10});
  const TransitionDensity dens(m, m.x0(), 17, 2000);
  double integral = 0.0;
  const double h1 = 0.5, h2 = 0.02;
  for (double a = 40.0; a < 140.0; a += h1)
    for (double b = -3.0; b < 1.0; b += h2) {
      const double x[] = {a + 0.5 * h1, b + 0.5 * h2};
      const double v = dens(10, x);
      CHECK(v >= 0.0);
      integral += v * h1 * h2;
    }
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}
