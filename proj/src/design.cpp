#include "rmc/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rmc/low_discrepancy.hpp"
#include "rmc/parallel.hpp"

namespace rmc {

bool DesignDomain::contains(std::span<const double> x) const {
  for (std::size_t j = 0; j < dim(); ++j)
    if (x[j] < lo[j] || x[j] > hi[j]) return false;
  return !constraint || constraint(x);
}

void DesignDomain::validate() const {
  if (lo.empty() || lo.size() != hi.size())
    throw std::invalid_argument("domain: lo and hi must have the same nonzero length");
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (!(lo[j] < hi[j]) || !std::isfinite(lo[j]) || !std::isfinite(hi[j]))
      throw std::invalid_argument("domain: need finite lo < hi in every coordinate");
}

void DesignDomain::check_feasible() const {
  validate();
  if (!constraint) return;
  Rng rng(0x5eed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr int kPilot = 10000;
  int accepted = 0;
  std::vector<double> x(dim());
  for (int i = 0; i < kPilot; ++i) {
    for (std::size_t j = 0; j < dim(); ++j) x[j] = lo[j] + (hi[j] - lo[j]) * u(rng);
    if (constraint(x)) ++accepted;
  }
  if (accepted < kPilot / 1000)
    throw DomainInfeasible("design domain constraint accepts fewer than 0.1% of pilot draws");
}

namespace {

Sites unit_hypercube(std::size_t n, std::size_t dim, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Sites s(dim, n);
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i)
      s(j, i) = (static_cast<double>(perm[i]) + u(rng)) / static_cast<double>(n);
  }
  return s;
}

void map_to_box(std::span<double> unit, const DesignDomain& dom) {
  for (std::size_t j = 0; j < dom.dim(); ++j)
    unit[j] = dom.lo[j] + (dom.hi[j] - dom.lo[j]) * unit[j];
}

template <class Sequence>
Sites from_sequence(std::size_t n, const DesignDomain& dom) {
  dom.validate();
  if (dom.constraint) dom.check_feasible();
  Sequence seq(dom.dim());
  Sites out(dom.dim(), n);
  std::vector<double> x(dom.dim());
  std::size_t filled = 0;
  while (filled < n) {
    seq.next(x);
    map_to_box(x, dom);
    if (dom.constraint && !dom.constraint(x)) continue;
    for (std::size_t j = 0; j < dom.dim(); ++j) out(j, filled) = x[j];
    ++filled;
  }
  return out;
}

}  // namespace

Sites lhs(std::size_t n, const DesignDomain& dom, Rng& rng) {
  if (n == 0) throw std::invalid_argument("lhs: n must be at least 1");
  dom.validate();
  if (dom.constraint) dom.check_feasible();
  const std::size_t d = dom.dim();
  Sites out(d, n);
  std::size_t filled = 0;
  std::vector<double> x(d);
  while (filled < n) {
    Sites cube = unit_hypercube(n, d, rng);
    for (std::size_t i = 0; i < n && filled < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[j] = cube(j, i);
      map_to_box(x, dom);
      if (dom.constraint && !dom.constraint(x)) continue;
      for (std::size_t j = 0; j < d; ++j) out(j, filled) = x[j];
      ++filled;
    }
  }
  return out;
}

Sites sobol(std::size_t n, const DesignDomain& dom) { return from_sequence<SobolSequence>(n, dom); }

Sites halton(std::size_t n, const DesignDomain& dom) {
  return from_sequence<HaltonSequence>(n, dom);
}

Sites grid(std::size_t n, const DesignDomain& dom) {
  dom.validate();
  if (dom.constraint) dom.check_feasible();
  const std::size_t d = dom.dim();
  Sites out(d, n);
  if (n == 0) return out;
  std::size_t per_axis =
      static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 1.0 / d) - 1e-9));
  std::vector<double> x(d);
  std::size_t filled = 0;
  // Refine the lattice until enough points pass the constraint.
  for (;; ++per_axis) {
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) total *= per_axis;
    filled = 0;
    for (std::size_t idx = 0; idx < total && filled < n; ++idx) {
      std::size_t rem = idx;
      for (std::size_t j = d; j-- > 0;) {
        const std::size_t k = rem % per_axis;
        rem /= per_axis;
        x[j] = dom.lo[j] + (dom.hi[j] - dom.lo[j]) * (k + 0.5) / per_axis;
      }
      if (dom.constraint && !dom.constraint(x)) continue;
      for (std::size_t j = 0; j < d; ++j) out(j, filled) = x[j];
      ++filled;
    }
    if (filled == n) return out;
  }
}

Sites probabilistic(std::size_t n, const MarketModel& model, int date,
                    std::span<const double> x0, const StreamKey& key,
                    const ContractSpec* itm_filter, SimCounters* counters) {
  if (date < 1) throw std::invalid_argument("probabilistic design requires t > 0");
  const std::size_t d = model.dim();
  Sites out(d, n);
  if (n == 0) return out;
  const double t = model.grid().date(date);
  std::vector<double> x(d);
  std::size_t attempts = 0;
  std::size_t filled = 0;
  SimCounters local;
  Rng rng = key.stream();
  while (filled < n) {
    std::copy(x0.begin(), x0.end(), x.begin());
    for (int k = 0; k < date; ++k) model.advance(x, rng, local);
    ++attempts;
    if (itm_filter && !itm_indicator(*itm_filter, t, x)) {
      if (attempts >= 10000 && filled * 1000 < attempts)
        throw DomainInfeasible("probabilistic design: in-the-money acceptance below 0.1%");
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) out(j, filled) = x[j];
    ++filled;
  }
  if (counters) *counters += local;
  return out;
}

BatchStats batch_stats(std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("batch_stats: empty batch");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : y) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  BatchStats out;
  out.mean = mean;
  if (y.size() >= 2) out.variance = std::max(0.0, m2 / static_cast<double>(y.size() - 1));
  return out;
}

int adaptive_replications(double pilot_variance, double target_variance) {
  if (!(target_variance > 0.0))
    throw std::invalid_argument("adaptive replications: target variance must be positive");
  return std::max(1, static_cast<int>(std::ceil(pilot_variance / target_variance)));
}

Eigen::VectorXd Design::mean_noise() const {
  return variances.array() / reps.cast<double>().array();
}

int Design::min_reps() const { return reps.size() == 0 ? 0 : reps.minCoeff(); }

void write_design_csv(std::ostream& os, const Design& d) {
  for (std::size_t j = 0; j < d.dim(); ++j) os << 'x' << (j + 1) << ',';
  os << "mean,variance,reps\n";
  os.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.dim(); ++j) os << d.sites(j, i) << ',';
    os << d.means[i] << ',' << d.variances[i] << ',' << d.reps[i] << '\n';
  }
}

}  // namespace rmc
