#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "../oracles/dense_kriging.hpp"
#include "rmc/kriging.hpp"

using namespace rmc;

namespace {

// Closed-form kernels written out independently of the library.
double ref_kernel(KernelFamily f, double s2, const std::vector<double>& theta, const double* a,
                  const double* b) {
  double r2 = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) r2 += std::pow((a[j] - b[j]) / theta[j], 2);
  const double r = std::sqrt(r2);
  switch (f) {
    case KernelFamily::SquaredExponential:
      return s2 * std::exp(-r2 / 2);
    case KernelFamily::Matern52:
      return s2 * (1 + std::sqrt(5.0) * r + 5 * r2 / 3) * std::exp(-std::sqrt(5.0) * r);
    case KernelFamily::Matern32:
      return s2 * (1 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r);
  }
  return 0.0;
}

Eigen::MatrixXd uniform_sites(Rng& rng, int d, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd s(d, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s(j, i) = u(rng);
  return s;
}

Eigen::VectorXd smooth_response(const Eigen::MatrixXd& s, Rng& rng, double noise_sd) {
  std::normal_distribution<double> z(0.0, noise_sd);
  Eigen::VectorXd y(s.cols());
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    double v = 0.0;
    for (Eigen::Index j = 0; j < s.rows(); ++j) v += std::sin(0.7 * s(j, i) + double(j));
    y[i] = v + z(rng);
  }
  return y;
}

KrigingModel random_model(Rng& rng, KernelFamily f, int d, int n) {
  const Eigen::MatrixXd s = uniform_sites(rng, d, n, 0.0, 5.0);
  Eigen::VectorXd noise(n);
  std::uniform_real_distribution<double> u(0.01, 0.2);
  for (int i = 0; i < n; ++i) noise[i] = u(rng);
  std::vector<double> theta(static_cast<std::size_t>(d));
  for (auto& t : theta) t = 0.8 + u(rng) * 5.0;
  return KrigingModel(KernelSpec{f, 1.7, theta}, s, smooth_response(s, rng, 0.1), noise);
}

const KernelFamily kFamilies[] = {KernelFamily::SquaredExponential, KernelFamily::Matern52,
                                  KernelFamily::Matern32};

}  // namespace

TEST_CASE("kernel evaluation") {
  const double x[] = {1.0, 2.0}, y[] = {3.0, -1.0};
  for (auto f : kFamilies) {
    const KernelSpec k{f, 2.5, {0.7, 1.9}};
    CHECK(k(x, x) == 2.5);
    CHECK(k(x, y) == doctest::Approx(ref_kernel(f, 2.5, k.lengthscales, x, y)).epsilon(1e-14));
    const KernelSpec flat{f, 2.5, {1e9, 1e9}};
    CHECK(flat(x, y) == doctest::Approx(2.5).epsilon(1e-8));
  }
  const KernelSpec se{KernelFamily::SquaredExponential, 1.0, {4.0}};
  const double a[] = {0.0}, b[] = {4.0};
  CHECK(se(a, b) == doctest::Approx(0.60653066).epsilon(1e-8));
  CHECK(se(a, b) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("kernel names and validation") {
  CHECK(parse_kernel_family("gaussian") == KernelFamily::SquaredExponential);
  CHECK(parse_kernel_family("matern-5/2") == KernelFamily::Matern52);
  for (auto f : kFamilies) CHECK(parse_kernel_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_kernel_family("cubic"), std::invalid_argument);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern52, 0.0, {1.0}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern52, 1.0, {-1.0}}.validate()), std::invalid_argument);
}

TEST_CASE("one-site posterior by hand") {
  Eigen::MatrixXd s(1, 1);
  s << 0.3;
  const KrigingModel m(KernelSpec{KernelFamily::Matern52, 1.0, {1.0}}, s,
                       Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 1.0));
  const double x[] = {0.3};
  const auto p = m.predict(x);
  CHECK(p.mean == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.variance == doctest::Approx(0.5).epsilon(1e-14));
  const double far[] = {1e4};
  const auto q = m.predict(far);
  CHECK(std::abs(q.mean) < 1e-12);
  CHECK(q.variance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior agrees with a dense solve") {
  Rng rng(11);
  for (auto f : kFamilies) {
    for (int rep = 0; rep < 5; ++rep) {
      const KrigingModel m = random_model(rng, f, 2, 20);
      const auto& k = m.kernel();
      auto kf = [&](const double* a, const double* b) {
        return ref_kernel(f, k.s2, k.lengthscales, a, b);
      };
      const Eigen::MatrixXd test = uniform_sites(rng, 2, 10, -1.0, 6.0);
      Eigen::VectorXd mean, var;
      m.predict(test, mean, var);
      for (Eigen::Index i = 0; i < test.cols(); ++i) {
        const auto o = oracle::dense_predict(kf, m.sites(), m.responses(), m.noise(), &test(0, i));
        const auto p = m.predict({&test(0, i), 2});
        CHECK(std::abs(p.mean - o.mean) < 1e-10);
        CHECK(std::abs(p.variance - o.variance) < 1e-10);
        CHECK(std::abs(mean[i] - o.mean) < 1e-10);
        CHECK(std::abs(var[i] - o.variance) < 1e-10);
      }
    }
  }
}

TEST_CASE("noise-free kriging interpolates") {
  Rng rng(12);
  const Eigen::MatrixXd s = uniform_sites(rng, 2, 15, 0.0, 5.0);
  const Eigen::VectorXd y = smooth_response(s, rng, 0.0);
  const KrigingModel m(KernelSpec{KernelFamily::Matern52, 1.0, {1.0, 1.0}}, s, y,
                       Eigen::VectorXd::Zero(15));
  for (int i = 0; i < 15; ++i) CHECK(std::abs(m.mean({&s(0, i), 2}) - y[i]) < 1e-8);
}

TEST_CASE("posterior covariance") {
  Rng rng(13);
  const KrigingModel m = random_model(rng, KernelFamily::Matern52, 2, 12);
  const Eigen::MatrixXd pts = uniform_sites(rng, 2, 30, -1.0, 6.0);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const std::span<const double> x{&pts(0, i), 2};
    CHECK(m.posterior_cov(x, x) == doctest::Approx(m.predict(x).variance).epsilon(1e-10));
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const std::span<const double> y{&pts(0, j), 2};
      CHECK(std::abs(m.posterior_cov(x, y)) <=
            std::sqrt(m.predict(x).variance * m.predict(y).variance) + 1e-12);
    }
  }
  const KernelSpec k{KernelFamily::Matern32, 1.3, {0.5, 2.0}};
  const KrigingModel prior(k, 2);
  const double a[] = {0.1, 0.2}, b[] = {0.4, 1.0};
  CHECK(prior.posterior_cov(a, b) == doctest::Approx(k(a, b)).epsilon(1e-15));
  CHECK(prior.predict(a).variance == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("rank-one update") {
  Rng rng(14);
  for (auto f : kFamilies) {
    const KrigingModel m = random_model(rng, f, 2, 15);
    const Eigen::MatrixXd test = uniform_sites(rng, 2, 50, -1.0, 6.0);
    const double xn[] = {2.2, 3.1};

    SUBCASE("matches a refit with frozen kernel") {
      const KrigingModel up = m.update(xn, 0.7, 0.05);
      Eigen::MatrixXd s(2, 16);
      s << m.sites(), Eigen::Map<const Eigen::Vector2d>(xn);
      Eigen::VectorXd y(16), n(16);
      y << m.responses(), 0.7;
      n << m.noise(), 0.05;
      const KrigingModel refit(m.kernel(), s, y, n);
      for (Eigen::Index i = 0; i < test.cols(); ++i) {
        const auto a = up.predict({&test(0, i), 2});
        const auto b = refit.predict({&test(0, i), 2});
        CHECK(std::abs(a.mean - b.mean) < 1e-8);
        CHECK(std::abs(a.variance - b.variance) < 1e-8);
        CHECK(a.variance <= m.predict({&test(0, i), 2}).variance + 1e-12);
      }
    }
    SUBCASE("noise-free observation pins the variance") {
      const KrigingModel up = m.update(xn, 0.7, 0.0);
      CHECK(up.predict(xn).variance < 1e-8);
    }
    SUBCASE("zero residual leaves the mean") {
      const KrigingModel up = m.update(xn, m.mean(xn), 0.1);
      for (Eigen::Index i = 0; i < test.cols(); ++i)
        CHECK(std::abs(up.mean({&test(0, i), 2}) - m.mean({&test(0, i), 2})) < 1e-10);
    }
    SUBCASE("variance reduction") {
      const double v = m.predict(xn).sd();
      CHECK(m.variance_reduction(xn, 0.0) == doctest::Approx(v).epsilon(1e-10));
      CHECK(m.variance_reduction(xn, 1e12) < 1e-5);
      for (double s2 : {0.001, 0.05, 1.0}) {
        const double after = m.update(xn, 123.0, s2).predict(xn).sd();
        CHECK(std::abs(m.variance_reduction(xn, s2) - (v - after)) < 1e-10);
      }
    }
    CHECK_THROWS_AS(m.update(xn, 0.0, -1e-3), std::invalid_argument);
  }
}

TEST_CASE("prediction is invariant to site order") {
  Rng rng(15);
  const KrigingModel m = random_model(rng, KernelFamily::Matern52, 3, 25);
  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd s(3, 25);
  Eigen::VectorXd y(25), n(25);
  for (int i = 0; i < 25; ++i) {
    s.col(i) = m.sites().col(perm[static_cast<std::size_t>(i)]);
    y[i] = m.responses()[perm[static_cast<std::size_t>(i)]];
    n[i] = m.noise()[perm[static_cast<std::size_t>(i)]];
  }
  const KrigingModel p(m.kernel(), s, y, n);
  const Eigen::MatrixXd test = uniform_sites(rng, 3, 20, 0.0, 5.0);
  for (Eigen::Index i = 0; i < test.cols(); ++i) {
    const auto a = m.predict({&test(0, i), 3});
    const auto b = p.predict({&test(0, i), 3});
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-10));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-8));
  }
}

TEST_CASE("variance stays within the prior") {
  Rng rng(16);
  const KrigingModel m = random_model(rng, KernelFamily::SquaredExponential, 2, 30);
  const Eigen::MatrixXd test = uniform_sites(rng, 2, 500, -3.0, 8.0);
  Eigen::VectorXd mean, var;
  m.predict(test, mean, var);
  CHECK(var.minCoeff() >= 0.0);
  CHECK(var.maxCoeff() <= m.kernel().s2 + 1e-4 * m.kernel().s2);
  CHECK(mean.allFinite());
}

TEST_CASE("duplicate noise-free sites need jitter") {
  Eigen::MatrixXd s(1, 3);
  s << 1.0, 1.0, 2.0;
  const KrigingModel m(KernelSpec{KernelFamily::SquaredExponential, 1.0, {1.0}}, s,
                       Eigen::Vector3d(1.0, 1.0, 0.5), Eigen::VectorXd::Zero(3));
  CHECK(m.jitter() > 0.0);
  CHECK(m.jitter() <= 1e-4);
  const double x[] = {1.5};
  CHECK(std::isfinite(m.predict(x).mean));
}

TEST_CASE("likelihood gradient matches central differences") {
  Rng rng(17);
  const Eigen::MatrixXd s = uniform_sites(rng, 2, 25, 0.0, 5.0);
  const Eigen::VectorXd y = smooth_response(s, rng, 0.2);
  Eigen::VectorXd noise = Eigen::VectorXd::Constant(25, 0.03);
  for (auto f : kFamilies) {
    for (bool nugget : {false, true}) {
      Eigen::VectorXd p(nugget ? 4 : 3);
      p << std::log(1.3), std::log(1.1), std::log(2.4);
      if (nugget) p[3] = std::log(0.05);
      const auto g = log_likelihood_gradient(f, s, y, nugget ? Eigen::VectorXd::Zero(25) : noise, p,
                                             nugget);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double h = 1e-5;
        Eigen::VectorXd a = p, b = p;
        a[j] += h;
        b[j] -= h;
        const double fd =
            (log_likelihood_gradient(f, s, y, nugget ? Eigen::VectorXd::Zero(25) : noise, a, nugget).value -
             log_likelihood_gradient(f, s, y, nugget ? Eigen::VectorXd::Zero(25) : noise, b, nugget).value) /
            (2 * h);
        CHECK(std::abs(g.gradient[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("likelihood value matches the model") {
  Rng rng(18);
  const KrigingModel m = random_model(rng, KernelFamily::Matern52, 2, 20);
  Eigen::VectorXd p(3);
  p << std::log(m.kernel().s2), std::log(m.kernel().lengthscales[0]),
      std::log(m.kernel().lengthscales[1]);
  const auto g = log_likelihood_gradient(KernelFamily::Matern52, m.sites(), m.responses(),
                                         m.noise(), p, false);
  CHECK(g.value == doctest::Approx(m.log_likelihood()).epsilon(1e-10));
}

TEST_CASE("maximum-likelihood fit") {
  Rng rng(19);
  const Eigen::MatrixXd s = uniform_sites(rng, 2, 60, 0.0, 10.0);
  const Eigen::VectorXd y = smooth_response(s, rng, 0.1);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(60, 0.01);
  FitOptions opt;
  opt.seed = 3;
  const FitResult r = fit(s, y, noise, false, opt);
  CHECK(r.report.log_likelihood >= r.report.initial_log_likelihood);
  CHECK(r.report.log_likelihood == doctest::Approx(r.model.log_likelihood()).epsilon(1e-9));
  for (double t : r.model.kernel().lengthscales) {
    CHECK(t >= 1e-2 * 10.0 * (1 - 1e-9));
    CHECK(t <= 1e2 * 10.0 * (1 + 1e-9));
  }
  const FitResult again = fit(s, y, noise, false, opt);
  CHECK(again.model.kernel().s2 == r.model.kernel().s2);

  SUBCASE("frozen kernel") {
    FitOptions fo = opt;
    fo.fixed = KernelSpec{KernelFamily::Matern32, 2.0, {1.5, 2.5}};
    const FitResult fr = fit(s, y, noise, false, fo);
    CHECK(fr.model.kernel().s2 == 2.0);
    CHECK(fr.model.kernel().lengthscales[1] == 2.5);
    CHECK(fr.model.kernel().family == KernelFamily::Matern32);
  }
  SUBCASE("homoscedastic nugget") {
    const FitResult h = fit(s, y, noise, true, opt);
    CHECK(h.report.noise_used == NoiseMode::HomoscedasticMle);
    CHECK(h.report.nugget > 0.0);
    CHECK(h.model.noise()[0] == h.report.nugget);
  }
  SUBCASE("too few sites") {
    CHECK_THROWS_AS(fit(s.leftCols(2), y.head(2), noise.head(2), false, opt), std::invalid_argument);
  }
}

TEST_CASE("fit from a design falls back to a nugget with few replicates") {
  Rng rng(20);
  Design d;
  d.sites = uniform_sites(rng, 1, 30, 0.0, 5.0);
  d.means = smooth_response(d.sites, rng, 0.1);
  d.variances = Eigen::VectorXd::Constant(30, 1.0);
  d.reps = Eigen::VectorXi::Constant(30, 10);
  FitOptions opt;
  CHECK(fit(d, opt).report.noise_used == NoiseMode::HomoscedasticMle);
  d.reps.setConstant(100);
  const FitResult e = fit(d, opt);
  CHECK(e.report.noise_used == NoiseMode::Empirical);
  CHECK(e.model.noise()[0] == doctest::Approx(0.01));
}

TEST_CASE("JSON round trip") {
  Rng rng(21);
  const KrigingModel m = random_model(rng, KernelFamily::Matern32, 2, 10);
  const auto j = to_json(m);
  CHECK(j.at("kernel").at("family") == "matern-3/2");
  const KrigingModel back = kriging_from_json(nlohmann::json::parse(j.dump()));
  const double x[] = {1.234, 4.321};
  CHECK(back.predict(x).mean == doctest::Approx(m.predict(x).mean).epsilon(1e-14));
  CHECK(back.predict(x).variance == doctest::Approx(m.predict(x).variance).epsilon(1e-12));
}
