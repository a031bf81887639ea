#include "rmc/sequential.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "rmc/parallel.hpp"

namespace rmc {

Acquisition parse_acquisition(const std::string& name) {
  if (name == "zc") return Acquisition::Zc;
  if (name == "zc-sur") return Acquisition::ZcSur;
  throw std::invalid_argument("unknown acquisition '" + name + "'");
}

std::string to_string(Acquisition a) { return a == Acquisition::Zc ? "zc" : "zc-sur"; }

void SequentialConfig::validate(std::size_t n_final) const {
  if (n0 < 3) throw std::invalid_argument("sequential: n0 must be at least 3");
  if (n_final < n0) throw std::invalid_argument("sequential: final design smaller than n0");
  if (refit_every < 0) throw std::invalid_argument("sequential: refit cadence must be >= 0");
}

double ei_zc(const Prediction& p, double h, double weight) {
  return weight * local_loss(p.mean, p.sd(), h);
}

double ei_zc(const KrigingModel& model, std::span<const double> x, double h, double weight) {
  return ei_zc(model.predict(x), h, weight);
}

double ei_zcsur(const Prediction& p, double h, double noise, double weight) {
  const double v2 = std::max(p.variance, 0.0);
  if (v2 <= 0.0 || weight == 0.0) return 0.0;
  const double next2 = std::isinf(noise) ? v2 : v2 * noise / (noise + v2);
  const double gain = local_loss(p.mean, std::sqrt(v2), h) - local_loss(p.mean, std::sqrt(next2), h);
  return weight * std::max(gain, 0.0);
}

double ei_zcsur(const KrigingModel& model, std::span<const double> x, double h, double noise,
                double weight) {
  return ei_zcsur(model.predict(x), h, noise, weight);
}

double design_integrated_loss(const KrigingModel& model, const SequentialProblem& problem) {
  return integrated_loss_at(model, problem, model.sites());
}

double integrated_loss_at(const KrigingModel& model, const SequentialProblem& problem,
                          const Sites& points) {
  const Eigen::Index n = points.cols();
  if (n == 0) return 0.0;
  const std::size_t d = static_cast<std::size_t>(points.rows());
  Eigen::VectorXd m, v;
  model.predict(points, m, v);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::span<const double> x{&points(0, i), d};
    acc += local_loss(m[i], std::sqrt(v[i]), problem.threshold(x)) * problem.weight(x);
  }
  return acc / static_cast<double>(n);
}

namespace {

void append_site(Design& design, std::span<const double> x, const BatchStats& stats, int reps) {
  const Eigen::Index n = design.sites.cols();
  const Eigen::Index d = static_cast<Eigen::Index>(x.size());
  design.sites.conservativeResize(d, n + 1);
  for (Eigen::Index j = 0; j < d; ++j) design.sites(j, n) = x[static_cast<std::size_t>(j)];
  design.means.conservativeResize(n + 1);
  design.means[n] = stats.mean;
  design.variances.conservativeResize(n + 1);
  design.variances[n] = stats.variance.value_or(0.0);
  design.reps.conservativeResize(n + 1);
  design.reps[n] = reps;
}

}  // namespace

SequentialResult grow_design(FitResult initial, Design design, std::size_t n_final,
                             const SequentialConfig& config, const SequentialProblem& problem) {
  config.validate(n_final);
  if (design.size() != initial.model.size())
    throw std::invalid_argument("grow_design: design and model differ in size");
  const std::size_t dim = design.dim();
  const std::size_t n_cand = config.candidates > 0 ? config.candidates : 100 * dim;
  const bool homoscedastic = initial.report.noise_used == NoiseMode::HomoscedasticMle;

  SequentialResult out{std::move(initial.model), initial.report, std::move(design), {}};
  std::size_t since_refit = 0;
  for (std::size_t k = out.design.size(); k < n_final; ++k) {
    Rng rng = problem.candidate_key.stream(k);
    const Sites cand = lhs(n_cand, problem.domain, rng);
    Eigen::VectorXd m, v2;
    out.model.predict(cand, m, v2);

    std::vector<double> scores(n_cand);
    parallel_for(n_cand, [&](std::size_t c) {
      const Eigen::Index ci = static_cast<Eigen::Index>(c);
      std::span<const double> x{&cand(0, ci), dim};
      const Prediction p{m[ci], v2[ci]};
      const double h = problem.threshold(x);
      const double w = problem.weight(x);
      if (config.acquisition == Acquisition::Zc) {
        scores[c] = ei_zc(p, h, w);
      } else {
        // Noise proxy: batch-mean noise of the nearest existing site.
        double noise = out.report.nugget;
        if (!homoscedastic) {
          Eigen::Index nearest = 0;
          (out.design.sites.colwise() - cand.col(ci)).colwise().squaredNorm().minCoeff(&nearest);
          noise = out.design.variances[nearest] / out.design.reps[nearest];
        }
        scores[c] = ei_zcsur(p, h, noise + out.model.jitter(), w);
      }
    });
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_cand; ++c)
      if (scores[c] > scores[best]) best = c;

    const Eigen::Index bi = static_cast<Eigen::Index>(best);
    std::vector<double> site(cand.col(bi).data(), cand.col(bi).data() + dim);
    const std::vector<double> ys = problem.simulate(site, k);
    const BatchStats stats = batch_stats(ys);
    const int reps = static_cast<int>(ys.size());
    append_site(out.design, site, stats, reps);

    ++since_refit;
    if (config.refit_every > 0 && since_refit >= static_cast<std::size_t>(config.refit_every)) {
      FitResult refit = fit(out.design, problem.fit);
      out.model = std::move(refit.model);
      out.report = refit.report;
      since_refit = 0;
    } else {
      const double noise = homoscedastic ? out.report.nugget : stats.variance.value_or(0.0) / reps;
      out.model = out.model.update(site, stats.mean, noise);
    }
    out.trace.push_back({k, std::move(site), scores[best], design_integrated_loss(out.model, problem),
                         integrated_loss_at(out.model, problem, problem.reference)});
  }
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<SequentialStep>& trace) {
  const std::size_t d = trace.empty() ? 0 : trace.front().site.size();
  os << "k";
  for (std::size_t j = 0; j < d; ++j) os << ",x" << (j + 1);
  os << ",acquisition,integrated_loss,reference_loss\n";
  os.precision(10);
  for (const auto& s : trace) {
    os << s.k;
    for (double x : s.site) os << ',' << x;
    os << ',' << s.score << ',' << s.integrated_loss << ',' << s.reference_loss << '\n';
  }
}

}  // namespace rmc
