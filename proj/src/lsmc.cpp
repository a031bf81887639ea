#include "rmc/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rmc/parallel.hpp"

namespace rmc {

void BasisSpec::validate() const {
  if (kind == Kind::Polynomial && degree < 0)
    throw std::invalid_argument("basis: polynomial degree must be >= 0");
  if (kind == Kind::Partition && cells < 1)
    throw std::invalid_argument("basis: partition needs at least one cell per dimension");
}

namespace {

void enumerate_exponents(std::size_t d, int degree, bool tensor, std::vector<int>& cur,
                         std::size_t j, int used, std::vector<std::vector<int>>& out) {
  if (j == d) {
    out.push_back(cur);
    return;
  }
  const int cap = tensor ? degree : degree - used;
  for (int e = 0; e <= cap; ++e) {
    cur[j] = e;
    enumerate_exponents(d, degree, tensor, cur, j + 1, used + e, out);
  }
  cur[j] = 0;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, bool& ridge) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() == a.cols()) {
    ridge = false;
    return qr.solve(y);
  }
  ridge = true;
  Eigen::MatrixXd g = a.transpose() * a;
  g.diagonal().array() += 1e-8;
  return g.ldlt().solve(a.transpose() * y);
}

}  // namespace

Eigen::MatrixXd PolynomialRegression::basis(const Eigen::MatrixXd& x) const {
  const Eigen::Index n = x.cols();
  const Eigen::Index d = x.rows();
  Eigen::MatrixXd b(n, static_cast<Eigen::Index>(exponents_.size()));
  std::vector<double> u(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j)
      u[static_cast<std::size_t>(j)] = (x(j, i) - center_[j]) / scale_[j];
    for (std::size_t k = 0; k < exponents_.size(); ++k) {
      double v = 1.0;
      for (Eigen::Index j = 0; j < d; ++j)
        for (int e = 0; e < exponents_[k][static_cast<std::size_t>(j)]; ++e)
          v *= u[static_cast<std::size_t>(j)];
      b(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return b;
}

double PolynomialRegression::continuation(std::span<const double> x) const {
  const std::size_t d = x.size();
  double u[32];
  for (std::size_t j = 0; j < d; ++j)
    u[j] = (x[j] - center_[static_cast<Eigen::Index>(j)]) / scale_[static_cast<Eigen::Index>(j)];
  double s = 0.0;
  for (std::size_t k = 0; k < exponents_.size(); ++k) {
    double v = beta_[static_cast<Eigen::Index>(k)];
    for (std::size_t j = 0; j < d; ++j)
      for (int e = 0; e < exponents_[k][j]; ++e) v *= u[j];
    s += v;
  }
  return s;
}

PolynomialRegression ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int degree,
                             bool tensor) {
  const Eigen::Index n = x.cols();
  const std::size_t d = static_cast<std::size_t>(x.rows());
  if (degree < 0) throw std::invalid_argument("ols: degree must be >= 0");
  if (d == 0 || d > 32) throw std::invalid_argument("ols: dimension must be in 1..32");
  if (y.size() != n) throw std::invalid_argument("ols: x and y differ in length");
  PolynomialRegression p;
  std::vector<int> cur(d, 0);
  enumerate_exponents(d, degree, tensor, cur, 0, 0, p.exponents_);
  // Constant term first, then by total degree.
  std::stable_sort(p.exponents_.begin(), p.exponents_.end(), [](const auto& a, const auto& b) {
    return std::accumulate(a.begin(), a.end(), 0) < std::accumulate(b.begin(), b.end(), 0);
  });
  if (n < static_cast<Eigen::Index>(p.exponents_.size()))
    throw std::invalid_argument("ols: fewer points than basis functions");
  p.center_ = x.rowwise().mean();
  p.scale_.resize(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    const double var = n > 1 ? (x.row(jj).array() - p.center_[jj]).square().sum() / static_cast<double>(n - 1) : 0.0;
    p.scale_[jj] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  p.beta_ = least_squares(p.basis(x), y, p.ridge_);
  return p;
}

// ---------------------------------------------------------------------------

std::size_t PartitionRegression::locate(std::span<const double> x) const {
  std::size_t node = 0;
  for (std::size_t level = 0; level < dim_; ++level) {
    const Node& nd = nodes_[node];
    const std::size_t slot = static_cast<std::size_t>(
        std::upper_bound(nd.cuts.begin(), nd.cuts.end(), x[level]) - nd.cuts.begin());
    node = nd.kids[slot];
  }
  return node;
}

double PartitionRegression::continuation(std::span<const double> x) const {
  const Cell& c = cells_[locate(x)];
  double v = c.beta[0];
  for (Eigen::Index j = 1; j < c.beta.size(); ++j) v += c.beta[j] * x[static_cast<std::size_t>(j - 1)];
  return v;
}

PartitionRegression bw11_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int r) {
  if (r < 1) throw std::invalid_argument("bw11: r must be >= 1");
  const Eigen::Index n = x.cols();
  const std::size_t d = static_cast<std::size_t>(x.rows());
  if (d == 0) throw std::invalid_argument("bw11: empty dimension");
  if (y.size() != n) throw std::invalid_argument("bw11: x and y differ in length");
  PartitionRegression pr;
  pr.dim_ = d;
  const double global_mean = n > 0 ? y.mean() : 0.0;
  const std::size_t rr = static_cast<std::size_t>(r);

  // Breadth-first construction; leaves become cells.
  std::vector<std::vector<Eigen::Index>> members;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<std::pair<std::size_t, std::vector<Eigen::Index>>> frontier;  // node id, members
  pr.nodes_.push_back({});
  frontier.emplace_back(0, std::move(all));
  for (std::size_t level = 0; level < d; ++level) {
    std::vector<std::pair<std::size_t, std::vector<Eigen::Index>>> next;
    const Eigen::Index coord = static_cast<Eigen::Index>(level);
    for (auto& [id, idx] : frontier) {
      std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return x(coord, a) < x(coord, b) || (x(coord, a) == x(coord, b) && a < b);
      });
      const std::size_t m = idx.size();
      PartitionRegression::Node nd;
      std::size_t begin = 0;
      for (std::size_t s = 0; s < rr; ++s) {
        const std::size_t end = (m * (s + 1)) / rr;
        std::vector<Eigen::Index> slice(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                        idx.begin() + static_cast<std::ptrdiff_t>(end));
        if (s + 1 < rr) {
          double cut;
          if (end < m && end > 0)
            cut = 0.5 * (x(coord, idx[end - 1]) + x(coord, idx[end]));
          else if (end < m)
            cut = x(coord, idx[end]);
          else
            cut = m > 0 ? x(coord, idx[m - 1]) : 0.0;
          nd.cuts.push_back(cut);
        }
        if (level + 1 < d) {
          nd.kids.push_back(pr.nodes_.size() + next.size() + 0);
          next.emplace_back(0, std::move(slice));
        } else {
          nd.kids.push_back(members.size());
          members.push_back(std::move(slice));
        }
        begin = end;
      }
      pr.nodes_[id] = std::move(nd);
    }
    // Materialize the next level's nodes with the ids reserved above.
    const std::size_t base = pr.nodes_.size();
    for (std::size_t k = 0; k < next.size(); ++k) next[k].first = base + k;
    pr.nodes_.resize(base + next.size());
    frontier = std::move(next);
  }

  pr.cells_.resize(members.size());
  pr.occupancy_.resize(members.size());
  parallel_for(members.size(), [&](std::size_t c) {
    const auto& idx = members[c];
    pr.occupancy_[c] = idx.size();
    PartitionRegression::Cell& cell = pr.cells_[c];
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    if (m < static_cast<Eigen::Index>(d + 1)) {
      cell.beta.resize(1);
      if (m == 0) {
        cell.beta[0] = global_mean;
      } else {
        double s = 0.0;
        for (Eigen::Index i : idx) s += y[i];
        cell.beta[0] = s / static_cast<double>(m);
      }
      return;
    }
    Eigen::MatrixXd a(m, static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index p = idx[static_cast<std::size_t>(i)];
      a(i, 0) = 1.0;
      for (std::size_t j = 0; j < d; ++j)
        a(i, static_cast<Eigen::Index>(j + 1)) = x(static_cast<Eigen::Index>(j), p);
      b[i] = y[p];
    }
    bool ridge = false;
    cell.beta = least_squares(a, b, ridge);
  }, 1);
  return pr;
}

// ---------------------------------------------------------------------------

namespace {

// Continuation estimate used when too few points remain to regress.
class ConstantSurface : public ContinuationSurface {
 public:
  explicit ConstantSurface(double c) : c_(c) {}
  double continuation(std::span<const double>) const override { return c_; }

 private:
  double c_;
};

}  // namespace

LsmcRun lsmc_backward(const MarketModel& model, const ContractSpec& contract, std::size_t n_paths,
                      const BasisSpec& basis, std::uint64_t seed) {
  contract.validate();
  basis.validate();
  if (n_paths < 1) throw std::invalid_argument("lsmc: need at least one path");
  const TimeGrid& grid = model.grid();
  const int n = grid.n_exercise;
  const std::size_t d = model.dim();
  LsmcRun run{StoppingPolicy(contract, grid), {}, 0};
  if (n <= 1) return run;

  const PathArray paths =
      simulate_paths(model, 0, model.x0(), n_paths, StreamKey{seed, 0, Purpose::GlobalPaths}, &run.sims);
  Eigen::VectorXd cash(static_cast<Eigen::Index>(n_paths));
  for (std::size_t i = 0; i < n_paths; ++i)
    cash[static_cast<Eigen::Index>(i)] = payoff(contract, grid.date(n), paths.state(i, n));

  const bool poly = basis.kind == BasisSpec::Kind::Polynomial;
  for (int date = n - 1; date >= 1; --date) {
    const double t = grid.date(date);
    std::vector<Eigen::Index> use;
    use.reserve(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i)
      if (!(poly && basis.itm_only) || itm_indicator(contract, t, paths.state(i, date)))
        use.push_back(static_cast<Eigen::Index>(i));
    const Eigen::Index m = static_cast<Eigen::Index>(use.size());
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(d), m);
    Eigen::VectorXd ys(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto s = paths.state(static_cast<std::size_t>(use[static_cast<std::size_t>(k)]), date);
      for (std::size_t j = 0; j < d; ++j) xs(static_cast<Eigen::Index>(j), k) = s[j];
      ys[k] = cash[use[static_cast<std::size_t>(k)]];
    }

    std::shared_ptr<const ContinuationSurface> surface;
    if (poly) {
      std::vector<int> cur(d, 0);
      std::vector<std::vector<int>> ex;
      enumerate_exponents(d, basis.degree, basis.tensor, cur, 0, 0, ex);
      if (m >= static_cast<Eigen::Index>(ex.size())) {
        auto p = std::make_shared<PolynomialRegression>(ols_fit(xs, ys, basis.degree, basis.tensor));
        if (p->ridge_used()) ++run.ridge_fallbacks;
        surface = p;
      } else {
        surface = std::make_shared<ConstantSurface>(m > 0 ? ys.mean() : 0.0);
      }
    } else {
      surface = std::make_shared<PartitionRegression>(bw11_fit(xs, ys, basis.cells));
    }
    run.policy.set_surface(date, surface);

    for (std::size_t i = 0; i < n_paths; ++i) {
      const auto s = paths.state(i, date);
      if (in_stopping_set(run.policy, date, s))
        cash[static_cast<Eigen::Index>(i)] = payoff(contract, t, s);
    }
  }
  return run;
}

}  // namespace rmc
