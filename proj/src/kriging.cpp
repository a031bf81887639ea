#include "rmc/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rmc/parallel.hpp"

namespace rmc {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997896;

double scaled_sq_dist(const double* a, const double* b, const double* theta, std::size_t d) {
  double r2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double u = (a[j] - b[j]) / theta[j];
    r2 += u * u;
  }
  return r2;
}

double correlation(KernelFamily f, double r2) {
  switch (f) {
    case KernelFamily::SquaredExponential:
      return std::exp(-0.5 * r2);
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * std::exp(-kSqrt5 * r);
    }
    case KernelFamily::Matern32: {
      const double r = std::sqrt(r2);
      return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    }
  }
  return 0.0;
}

// d k / d log theta_j divided by s2 * (dx_j / theta_j)^2.
double lengthscale_factor(KernelFamily f, double r2) {
  switch (f) {
    case KernelFamily::SquaredExponential:
      return std::exp(-0.5 * r2);
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      return 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
    }
    case KernelFamily::Matern32:
      return 3.0 * std::exp(-kSqrt3 * std::sqrt(r2));
  }
  return 0.0;
}

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "squared-exponential" || name == "gaussian") return KernelFamily::SquaredExponential;
  if (name == "matern-5/2" || name == "matern52") return KernelFamily::Matern52;
  if (name == "matern-3/2" || name == "matern32") return KernelFamily::Matern32;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::SquaredExponential: return "squared-exponential";
    case KernelFamily::Matern52: return "matern-5/2";
    case KernelFamily::Matern32: return "matern-3/2";
  }
  return "?";
}

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "empirical") return NoiseMode::Empirical;
  if (name == "homoscedastic-mle" || name == "homoscedastic") return NoiseMode::HomoscedasticMle;
  throw std::invalid_argument("unknown noise mode '" + name + "'");
}

std::string to_string(NoiseMode m) {
  return m == NoiseMode::Empirical ? "empirical" : "homoscedastic-mle";
}

void KernelSpec::validate() const {
  if (!(s2 > 0.0)) throw std::invalid_argument("kernel: s2 must be positive");
  if (lengthscales.empty()) throw std::invalid_argument("kernel: no length-scales");
  for (double t : lengthscales)
    if (!(t > 0.0)) throw std::invalid_argument("kernel: length-scales must be positive");
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const {
  return s2 * correlation(family, scaled_sq_dist(x.data(), y.data(), lengthscales.data(), dim()));
}

double KernelSpec::of_distance(double rho) const { return s2 * correlation(family, rho * rho); }

double Prediction::sd() const { return std::sqrt(std::max(variance, 0.0)); }

// ---------------------------------------------------------------------------

KrigingModel::KrigingModel(KernelSpec kernel, std::size_t dim)
    : kernel_(std::move(kernel)), sites_(dim, 0), y_(0), noise_(0), chol_(0, 0), alpha_(0) {
  kernel_.validate();
  if (kernel_.dim() != dim) throw std::invalid_argument("kriging: kernel dimension mismatch");
}

KrigingModel::KrigingModel(KernelSpec kernel, Eigen::MatrixXd sites, Eigen::VectorXd y,
                           Eigen::VectorXd noise)
    : kernel_(std::move(kernel)), sites_(std::move(sites)), y_(std::move(y)),
      noise_(std::move(noise)) {
  kernel_.validate();
  if (kernel_.dim() != static_cast<std::size_t>(sites_.rows()))
    throw std::invalid_argument("kriging: kernel dimension mismatch");
  if (y_.size() != sites_.cols() || noise_.size() != sites_.cols())
    throw std::invalid_argument("kriging: sites, responses and noise differ in length");
  if ((noise_.array() < 0.0).any()) throw std::invalid_argument("kriging: negative noise");
  factorize();
}

void KrigingModel::factorize() {
  const Eigen::Index n = sites_.cols();
  const std::size_t d = dim();
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel_.s2 * correlation(kernel_.family,
                                                scaled_sq_dist(&sites_(0, i), &sites_(0, j),
                                                               kernel_.lengthscales.data(), d));
      a(i, j) = v;
      a(j, i) = v;
    }
    a(i, i) += noise_[i];
  }
  // No jitter first; then 1e-8 s2 escalating by 10x up to 1e-4 s2.
  const double floor = 1e-12 * kernel_.s2;
  for (double jitter = 0.0; jitter <= 1e-4 * kernel_.s2 * (1 + 1e-9);
       jitter = jitter == 0.0 ? 1e-8 * kernel_.s2 : jitter * 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(b);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if (n > 0 && l.diagonal().array().square().minCoeff() <= floor) continue;
    jitter_ = jitter;
    chol_ = std::move(l);
    alpha_ = y_;
    chol_.triangularView<Eigen::Lower>().solveInPlace(alpha_);
    chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
    return;
  }
  throw FitFailure("kriging: covariance matrix is not positive definite after maximum jitter");
}

Eigen::VectorXd KrigingModel::cross_cov(std::span<const double> x) const {
  const Eigen::Index n = sites_.cols();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i)
    k[i] = kernel_.s2 * correlation(kernel_.family,
                                    scaled_sq_dist(&sites_(0, i), x.data(),
                                                   kernel_.lengthscales.data(), dim()));
  return k;
}

double KrigingModel::mean(std::span<const double> x) const {
  const Eigen::Index n = sites_.cols();
  const std::size_t d = dim();
  const double* theta = kernel_.lengthscales.data();
  double m = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    m += alpha_[i] * correlation(kernel_.family, scaled_sq_dist(&sites_(0, i), x.data(), theta, d));
  return kernel_.s2 * m;
}

Prediction KrigingModel::predict(std::span<const double> x) const {
  Prediction p;
  const double prior = kernel_.s2;
  if (size() == 0) {
    p.variance = prior;
    return p;
  }
  Eigen::VectorXd k = cross_cov(x);
  p.mean = k.dot(alpha_);
  chol_.triangularView<Eigen::Lower>().solveInPlace(k);
  p.variance = std::max(0.0, prior - k.squaredNorm());
  return p;
}

void KrigingModel::predict(const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                           Eigen::VectorXd& var) const {
  const Eigen::Index m = points.cols();
  const Eigen::Index n = sites_.cols();
  mean.resize(m);
  var.resize(m);
  if (n == 0) {
    mean.setZero();
    var.setConstant(kernel_.s2);
    return;
  }
  Eigen::MatrixXd k(n, m);
  for (Eigen::Index c = 0; c < m; ++c)
    k.col(c) = cross_cov({&points(0, c), dim()});
  mean = k.transpose() * alpha_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(k);
  var = (kernel_.s2 - k.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
}

double KrigingModel::posterior_cov(std::span<const double> x, std::span<const double> y) const {
  const double prior = kernel_(x, y);
  if (size() == 0) return prior;
  Eigen::VectorXd kx = cross_cov(x);
  Eigen::VectorXd ky = cross_cov(y);
  chol_.triangularView<Eigen::Lower>().solveInPlace(kx);
  chol_.triangularView<Eigen::Lower>().solveInPlace(ky);
  return prior - kx.dot(ky);
}

KrigingModel KrigingModel::update(std::span<const double> x_new, double y_new,
                                  double noise_new) const {
  if (!(noise_new >= 0.0)) throw std::invalid_argument("kriging update: negative noise");
  if (x_new.size() != dim()) throw std::invalid_argument("kriging update: dimension mismatch");
  const Eigen::Index n = sites_.cols();
  KrigingModel out;
  out.kernel_ = kernel_;
  out.jitter_ = jitter_;
  out.sites_.resize(sites_.rows(), n + 1);
  out.sites_.leftCols(n) = sites_;
  for (std::size_t j = 0; j < dim(); ++j) out.sites_(static_cast<Eigen::Index>(j), n) = x_new[j];
  out.y_.resize(n + 1);
  out.y_.head(n) = y_;
  out.y_[n] = y_new;
  out.noise_.resize(n + 1);
  out.noise_.head(n) = noise_;
  out.noise_[n] = noise_new;

  Eigen::VectorXd l = cross_cov(x_new);
  if (n > 0) chol_.triangularView<Eigen::Lower>().solveInPlace(l);
  const double pivot = kernel_.s2 + noise_new + jitter_ - l.squaredNorm();
  if (!(pivot > 1e-12 * kernel_.s2)) {
    // Near-duplicate noise-free site: refactorize with escalated jitter.
    out.factorize();
    return out;
  }
  out.chol_.setZero(n + 1, n + 1);
  out.chol_.topLeftCorner(n, n) = chol_;
  out.chol_.row(n).head(n) = l.transpose();
  out.chol_(n, n) = std::sqrt(pivot);
  out.alpha_ = out.y_;
  out.chol_.triangularView<Eigen::Lower>().solveInPlace(out.alpha_);
  out.chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(out.alpha_);
  return out;
}

double KrigingModel::variance_reduction(std::span<const double> x_new, double noise_new) const {
  const double v2 = predict(x_new).variance;
  const double s2 = noise_new + jitter_;
  if (v2 <= 0.0) return 0.0;
  const double v = std::sqrt(v2);
  return v * (1.0 - std::sqrt(s2) / std::sqrt(s2 + v2));
}

double KrigingModel::log_likelihood() const {
  const double n = static_cast<double>(size());
  return -0.5 * y_.dot(alpha_) - chol_.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

// ---------------------------------------------------------------------------
// Maximum likelihood

namespace {

struct LikelihoodProblem {
  KernelFamily family;
  const Eigen::MatrixXd& sites;
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& noise;
  bool with_nugget;

  std::size_t dim() const { return static_cast<std::size_t>(sites.rows()); }

  // Builds K (kernel part) and A = K + noise (+ nugget).
  void assemble(const Eigen::VectorXd& lp, Eigen::MatrixXd& k, Eigen::MatrixXd& a) const {
    const Eigen::Index n = sites.cols();
    const std::size_t d = dim();
    const double s2 = std::exp(lp[0]);
    std::vector<double> theta(d);
    for (std::size_t j = 0; j < d; ++j) theta[j] = std::exp(lp[1 + static_cast<Eigen::Index>(j)]);
    k.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v =
            s2 * correlation(family, scaled_sq_dist(&sites(0, i), &sites(0, j), theta.data(), d));
        k(i, j) = v;
        k(j, i) = v;
      }
    a = k;
    a.diagonal() += noise;
    if (with_nugget) a.diagonal().array() += std::exp(lp[1 + static_cast<Eigen::Index>(d)]);
  }

  static bool factor(const Eigen::MatrixXd& a, double s2, Eigen::LLT<Eigen::MatrixXd>& llt) {
    for (double jitter = 0.0; jitter <= 1e-4 * s2 * (1 + 1e-9);
         jitter = jitter == 0.0 ? 1e-8 * s2 : jitter * 10.0) {
      Eigen::MatrixXd b = a;
      b.diagonal().array() += jitter;
      llt.compute(b);
      if (llt.info() == Eigen::Success &&
          (b.rows() == 0 || llt.matrixLLT().diagonal().array().square().minCoeff() > 1e-12 * s2))
        return true;
    }
    return false;
  }

  double value(const Eigen::VectorXd& lp) const {
    Eigen::MatrixXd k, a;
    assemble(lp, k, a);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factor(a, std::exp(lp[0]), llt)) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd alpha = llt.solve(y);
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha) - llt.matrixLLT().diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
  }

  LikelihoodValue value_and_gradient(const Eigen::VectorXd& lp) const {
    const std::size_t d = dim();
    LikelihoodValue out;
    out.gradient = Eigen::VectorXd::Zero(lp.size());
    Eigen::MatrixXd k, a;
    assemble(lp, k, a);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factor(a, std::exp(lp[0]), llt)) {
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    const Eigen::Index n = y.size();
    const Eigen::VectorXd alpha = llt.solve(y);
    out.value = -0.5 * y.dot(alpha) - llt.matrixLLT().diagonal().array().log().sum() -
                0.5 * static_cast<double>(n) * kLog2Pi;
    // d ll / d p = 0.5 tr((alpha alpha^T - A^{-1}) dA/dp)
    Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
    w = alpha * alpha.transpose() - w;
    out.gradient[0] = 0.5 * (w.array() * k.array()).sum();
    const double s2 = std::exp(lp[0]);
    std::vector<double> theta(d);
    for (std::size_t j = 0; j < d; ++j) theta[j] = std::exp(lp[1 + static_cast<Eigen::Index>(j)]);
    std::vector<double> acc(d, 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index m = 0; m < i; ++m) {
        const double r2 = scaled_sq_dist(&sites(0, i), &sites(0, m), theta.data(), d);
        const double f = s2 * lengthscale_factor(family, r2) * w(i, m);
        for (std::size_t j = 0; j < d; ++j) {
          const double u = (sites(static_cast<Eigen::Index>(j), i) -
                            sites(static_cast<Eigen::Index>(j), m)) / theta[j];
          acc[j] += f * u * u;
        }
      }
    // Off-diagonal pairs appear twice in the trace; the 0.5 cancels.
    for (std::size_t j = 0; j < d; ++j) out.gradient[1 + static_cast<Eigen::Index>(j)] = acc[j];
    if (with_nugget) {
      const double nug = std::exp(lp[1 + static_cast<Eigen::Index>(d)]);
      out.gradient[1 + static_cast<Eigen::Index>(d)] = 0.5 * nug * w.trace();
    }
    return out;
  }
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Box-constrained BFGS ascent with projected Armijo backtracking. Only the
// coordinates flagged in `free` move.
OptimResult maximize(const LikelihoodProblem& prob, Eigen::VectorXd x, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, const std::vector<bool>& free, int max_iter,
                     double tol) {
  const Eigen::Index p = x.size();
  x = x.cwiseMax(lo).cwiseMin(hi);
  LikelihoodValue cur = prob.value_and_gradient(x);
  OptimResult res;
  if (!std::isfinite(cur.value)) {
    res.x = x;
    return res;
  }
  auto mask = [&](Eigen::VectorXd g) {
    for (Eigen::Index i = 0; i < p; ++i)
      if (!free[static_cast<std::size_t>(i)]) g[i] = 0.0;
    return g;
  };
  cur.gradient = mask(cur.gradient);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(p, p);
  int it = 0;
  for (; it < max_iter; ++it) {
    // Projected gradient (ascent direction blocked at active bounds).
    Eigen::VectorXd pg = cur.gradient;
    std::vector<bool> active(static_cast<std::size_t>(p), false);
    for (Eigen::Index i = 0; i < p; ++i) {
      if ((x[i] <= lo[i] && pg[i] < 0.0) || (x[i] >= hi[i] && pg[i] > 0.0)) {
        pg[i] = 0.0;
        active[static_cast<std::size_t>(i)] = true;
      }
    }
    if (pg.lpNorm<Eigen::Infinity>() < tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = h * pg;
    for (Eigen::Index i = 0; i < p; ++i)
      if (active[static_cast<std::size_t>(i)] || !free[static_cast<std::size_t>(i)]) dir[i] = 0.0;
    if (dir.dot(pg) <= 0.0) {
      h.setIdentity();
      dir = pg;
    }
    const double longest = dir.lpNorm<Eigen::Infinity>();
    if (longest > 2.0) dir *= 2.0 / longest;
    double step = 1.0;
    Eigen::VectorXd trial;
    double trial_value = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      trial = (x + step * dir).cwiseMax(lo).cwiseMin(hi);
      trial_value = prob.value(trial);
      if (std::isfinite(trial_value) &&
          trial_value >= cur.value + 1e-4 * cur.gradient.dot(trial - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = true;  // no ascent possible from here
      break;
    }
    LikelihoodValue next = prob.value_and_gradient(trial);
    next.gradient = mask(next.gradient);
    const Eigen::VectorXd s = trial - x;
    // Ascent: curvature pairs use the negated gradient change.
    const Eigen::VectorXd yv = cur.gradient - next.gradient;
    const double sy = s.dot(yv);
    const double gain = next.value - cur.value;
    x = trial;
    cur = std::move(next);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
      h = (eye - rho * s * yv.transpose()) * h * (eye - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    }
    if (gain < 1e-10 * (1.0 + std::abs(cur.value))) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.x = x;
  res.value = cur.value;
  res.iterations = it;
  return res;
}

double sample_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  const double m = y.mean();
  return (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
}

}  // namespace

LikelihoodValue log_likelihood_gradient(KernelFamily family, const Eigen::MatrixXd& sites,
                                        const Eigen::VectorXd& y, const Eigen::VectorXd& noise,
                                        const Eigen::VectorXd& log_params, bool with_nugget) {
  LikelihoodProblem prob{family, sites, y, noise, with_nugget};
  return prob.value_and_gradient(log_params);
}

FitResult fit(const Eigen::MatrixXd& sites, const Eigen::VectorXd& y,
              const Eigen::VectorXd& noise, bool homoscedastic, const FitOptions& options) {
  const Eigen::Index n = sites.cols();
  const std::size_t d = static_cast<std::size_t>(sites.rows());
  if (n < 3) throw std::invalid_argument("kriging fit: need at least 3 sites");
  if (y.size() != n) throw std::invalid_argument("kriging fit: response length mismatch");
  if (!homoscedastic && noise.size() != n)
    throw std::invalid_argument("kriging fit: noise length mismatch");

  const Eigen::VectorXd base_noise = homoscedastic ? Eigen::VectorXd::Zero(n) : noise;
  const KernelFamily family = options.fixed ? options.fixed->family : options.family;
  LikelihoodProblem prob{family, sites, y, base_noise, homoscedastic};

  double vy = sample_variance(y);
  if (!(vy > 0.0)) vy = 1.0;
  std::vector<double> width(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto row = sites.row(static_cast<Eigen::Index>(j));
    width[j] = row.maxCoeff() - row.minCoeff();
    if (!(width[j] > 0.0)) width[j] = 1.0;
  }

  const Eigen::Index p = static_cast<Eigen::Index>(1 + d + (homoscedastic ? 1 : 0));
  Eigen::VectorXd lo(p), hi(p), x0(p);
  lo[0] = std::log(1e-6 * vy);
  hi[0] = std::log(1e2 * vy);
  x0[0] = std::log(vy);
  for (std::size_t j = 0; j < d; ++j) {
    const Eigen::Index i = 1 + static_cast<Eigen::Index>(j);
    lo[i] = std::log(1e-2 * width[j]);
    hi[i] = std::log(1e2 * width[j]);
    x0[i] = std::log(0.5 * width[j]);
  }
  if (homoscedastic) {
    lo[p - 1] = std::log(1e-8 * vy);
    hi[p - 1] = std::log(1e1 * vy);
    x0[p - 1] = std::log(0.1 * vy);
  }
  std::vector<bool> free(static_cast<std::size_t>(p), true);
  if (options.fixed) {
    const KernelSpec& fk = *options.fixed;
    fk.validate();
    if (fk.dim() != d) throw std::invalid_argument("kriging fit: frozen kernel dimension mismatch");
    x0[0] = std::log(fk.s2);
    for (std::size_t j = 0; j < d; ++j) x0[1 + static_cast<Eigen::Index>(j)] = std::log(fk.lengthscales[j]);
    lo.head(1 + d) = x0.head(1 + d);
    hi.head(1 + d) = x0.head(1 + d);
    for (std::size_t i = 0; i < 1 + d; ++i) free[i] = false;
  }

  auto build = [&](const Eigen::VectorXd& lp, FitReport report) {
    KernelSpec k{family, std::exp(lp[0]), std::vector<double>(d)};
    for (std::size_t j = 0; j < d; ++j) k.lengthscales[j] = std::exp(lp[1 + static_cast<Eigen::Index>(j)]);
    Eigen::VectorXd nz = base_noise;
    if (homoscedastic) {
      report.nugget = std::exp(lp[p - 1]);
      nz.setConstant(report.nugget);
    }
    report.noise_used = homoscedastic ? NoiseMode::HomoscedasticMle : NoiseMode::Empirical;
    return FitResult{KrigingModel(std::move(k), sites, y, std::move(nz)), report};
  };

  const double initial = prob.value(x0.cwiseMax(lo).cwiseMin(hi));
  const bool nothing_free = std::none_of(free.begin(), free.end(), [](bool b) { return b; });
  if (nothing_free) {
    FitReport r;
    r.initial_log_likelihood = r.log_likelihood = initial;
    return build(x0, r);
  }

  // Start 0 is the heuristic guess; the rest are uniform in the log box.
  const int starts = std::max(1, options.fixed ? 1 : options.starts);
  std::vector<Eigen::VectorXd> inits(static_cast<std::size_t>(starts), x0);
  Rng rng(stream_seed(options.seed, 0, Purpose::Likelihood));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 1; s < starts; ++s)
    for (Eigen::Index i = 0; i < p; ++i)
      if (free[static_cast<std::size_t>(i)])
        inits[static_cast<std::size_t>(s)][i] = lo[i] + (hi[i] - lo[i]) * u(rng);

  std::vector<OptimResult> results(inits.size());
  parallel_for(inits.size(), [&](std::size_t s) {
    results[s] = maximize(prob, inits[s], lo, hi, free, options.max_iterations, options.tolerance);
  }, 1);

  std::size_t best = 0;
  for (std::size_t s = 1; s < results.size(); ++s)
    if (results[s].value > results[best].value) best = s;
  if (!std::isfinite(results[best].value))
    throw FitFailure("kriging fit: likelihood could not be evaluated at any start");
  FitReport report;
  report.initial_log_likelihood = initial;
  report.log_likelihood = results[best].value;
  report.iterations = results[best].iterations;
  report.converged = results[best].converged;
  return build(results[best].x, report);
}

FitResult fit(const Design& design, const FitOptions& options) {
  const bool homoscedastic = options.noise == NoiseMode::HomoscedasticMle ||
                             design.min_reps() < options.min_reps_empirical;
  return fit(design.sites, design.means, design.mean_noise(), homoscedastic, options);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const KrigingModel& m) {
  nlohmann::json j;
  j["kernel"] = {{"family", to_string(m.kernel().family)},
                 {"s2", m.kernel().s2},
                 {"lengthscales", m.kernel().lengthscales}};
  nlohmann::json sites = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.sites().cols(); ++i) {
    std::vector<double> s(m.sites().col(i).data(), m.sites().col(i).data() + m.sites().rows());
    sites.push_back(s);
  }
  j["dim"] = m.dim();
  j["sites"] = sites;
  j["responses"] = std::vector<double>(m.responses().data(), m.responses().data() + m.size());
  j["noise"] = std::vector<double>(m.noise().data(), m.noise().data() + m.size());
  return j;
}

KrigingModel kriging_from_json(const nlohmann::json& j) {
  KernelSpec k;
  k.family = parse_kernel_family(j.at("kernel").at("family").get<std::string>());
  k.s2 = j.at("kernel").at("s2").get<double>();
  k.lengthscales = j.at("kernel").at("lengthscales").get<std::vector<double>>();
  const auto& sites = j.at("sites");
  const std::size_t d = j.at("dim").get<std::size_t>();
  const Eigen::Index n = static_cast<Eigen::Index>(sites.size());
  if (n == 0) return KrigingModel(std::move(k), d);
  Eigen::MatrixXd s(static_cast<Eigen::Index>(d), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto v = sites[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (v.size() != d) throw std::invalid_argument("kriging json: site dimension mismatch");
    for (std::size_t jj = 0; jj < d; ++jj) s(static_cast<Eigen::Index>(jj), i) = v[jj];
  }
  const auto y = j.at("responses").get<std::vector<double>>();
  const auto nz = j.at("noise").get<std::vector<double>>();
  return KrigingModel(std::move(k), std::move(s),
                      Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
                      Eigen::Map<const Eigen::VectorXd>(nz.data(), static_cast<Eigen::Index>(nz.size())));
}

}  // namespace rmc
