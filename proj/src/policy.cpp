#include "rmc/policy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rmc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

Response parse_response(const std::string& name) {
  if (name == "continuation") return Response::Continuation;
  if (name == "timing") return Response::Timing;
  throw std::invalid_argument("unknown response '" + name + "'");
}

std::string to_string(Response r) { return r == Response::Continuation ? "continuation" : "timing"; }

KrigingContinuation::KrigingContinuation(KrigingModel model, ContractSpec contract, double t,
                                         Response response)
    : model_(std::move(model)), contract_(contract), t_(t), response_(response) {}

double KrigingContinuation::continuation(std::span<const double> x) const {
  const double m = model_.mean(x);
  return response_ == Response::Timing ? m + payoff(contract_, t_, x) : m;
}

Prediction KrigingContinuation::predict(std::span<const double> x) const {
  Prediction p = model_.predict(x);
  if (response_ == Response::Timing) p.mean += payoff(contract_, t_, x);
  return p;
}

StoppingPolicy::StoppingPolicy(ContractSpec contract, TimeGrid grid)
    : contract_(contract), grid_(grid),
      surfaces_(static_cast<std::size_t>(std::max(grid.n_exercise, 1))) {
  grid_.validate();
}

void StoppingPolicy::set_surface(int date, std::shared_ptr<const ContinuationSurface> surface) {
  if (date < 1 || date >= grid_.n_exercise)
    throw std::out_of_range("policy: surfaces live on dates 1..n-1");
  surfaces_[static_cast<std::size_t>(date)] = std::move(surface);
}

const ContinuationSurface* StoppingPolicy::surface(int date) const {
  if (date < 1 || date >= grid_.n_exercise) return nullptr;
  return surfaces_[static_cast<std::size_t>(date)].get();
}

bool in_stopping_set(const StoppingPolicy& policy, int date, std::span<const double> x) {
  const int n = policy.grid().n_exercise;
  if (date < 0 || date > n) throw std::out_of_range("stopping set: date off the grid");
  if (date == n) return true;
  const double h = payoff(policy.contract(), policy.grid().date(date), x);
  if (!(h > 0.0)) return false;
  const ContinuationSurface* s = policy.surface(date);
  if (s == nullptr) throw std::logic_error("stopping set: no surface at date " + std::to_string(date));
  return s->continuation(x) <= h;
}

double pathwise_payoff(const StoppingPolicy& policy, int t, const PathArray& paths,
                       std::size_t path) {
  const int n = policy.grid().n_exercise;
  if (t < 0 || t >= n) throw std::invalid_argument("pathwise payoff: t must be before maturity");
  if (path >= paths.size() || paths.first_date() > t + 1 ||
      paths.first_date() + paths.n_dates() - 1 < n)
    throw std::invalid_argument("pathwise payoff: path does not cover dates t+1..T");
  for (int s = t + 1; s <= n; ++s) {
    const auto x = paths.state(path, s);
    if (in_stopping_set(policy, s, x)) return payoff(policy.contract(), policy.grid().date(s), x);
  }
  return 0.0;  // unreachable: S_T is everything
}

double sample_payoff(const StoppingPolicy& policy, const MarketModel& model, int t,
                     std::span<const double> x, Rng& rng, SimCounters& counters) {
  const int n = policy.grid().n_exercise;
  if (t < 0 || t >= n) throw std::invalid_argument("sample payoff: t must be before maturity");
  double buf[16];
  std::vector<double> heap;
  std::span<double> state;
  if (x.size() <= 16) {
    state = {buf, x.size()};
  } else {
    heap.resize(x.size());
    state = heap;
  }
  std::copy(x.begin(), x.end(), state.begin());
  for (int s = t + 1; s <= n; ++s) {
    model.advance(state, rng, counters);
    if (in_stopping_set(policy, s, state))
      return payoff(policy.contract(), policy.grid().date(s), state);
  }
  return 0.0;
}

double local_loss(double m, double v, double h) {
  const double d = std::abs(m - h);
  if (!(v > 0.0)) return 0.0;
  const double z = -d / v;
  return std::max(0.0, v * std_normal_pdf(z) - d * std_normal_cdf(z));
}

LossReport integrated_loss(const StoppingPolicy& policy, int date, const Eigen::MatrixXd& sites,
                           const TransitionDensity& density) {
  LossReport r;
  const std::size_t n = static_cast<std::size_t>(sites.cols());
  const std::size_t d = static_cast<std::size_t>(sites.rows());
  const ContinuationSurface* s = policy.surface(date);
  const double t = policy.grid().date(date);
  r.loss.resize(n, 0.0);
  r.weight.resize(n, 0.0);
  if (n == 0) return r;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> x{&sites(0, static_cast<Eigen::Index>(i)), d};
    r.weight[i] = density(date, x);
    if (s != nullptr) {
      const Prediction p = s->predict(x);
      r.loss[i] = local_loss(p.mean, p.sd(), payoff(policy.contract(), t, x));
    }
    acc += r.loss[i] * r.weight[i];
  }
  r.integrated = acc / static_cast<double>(n);
  return r;
}

}  // namespace rmc
