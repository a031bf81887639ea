#include "rmc/contracts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmc {

void ContractSpec::validate() const {
  if (!(strike > 0.0)) throw std::invalid_argument("contract: strike must be positive");
  if (assets < 1) throw std::invalid_argument("contract: at least one asset is required");
  if (family == PayoffFamily::Put && assets != 1)
    throw std::invalid_argument("contract: a single-asset put reads exactly one coordinate");
}

namespace {

double intrinsic(const ContractSpec& c, std::span<const double> x) {
  if (x.size() < c.assets)
    throw std::invalid_argument("payoff: state has " + std::to_string(x.size()) +
                                " coordinates, contract needs " + std::to_string(c.assets));
  switch (c.family) {
    case PayoffFamily::Put:
      return c.strike - x[0];
    case PayoffFamily::BasketPut: {
      double s = 0.0;
      for (std::size_t j = 0; j < c.assets; ++j) s += x[j];
      return c.strike - s / static_cast<double>(c.assets);
    }
    case PayoffFamily::MaxCall:
      return *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(c.assets)) -
             c.strike;
  }
  return 0.0;
}

}  // namespace

double payoff(const ContractSpec& c, double t, std::span<const double> x) {
  const double v = intrinsic(c, x);
  return v > 0.0 ? std::exp(-c.rate * t) * v : 0.0;
}

bool itm_indicator(const ContractSpec& c, double t, std::span<const double> x) {
  return payoff(c, t, x) > 0.0;
}

bool itm_closure(const ContractSpec& c, std::span<const double> x) {
  return intrinsic(c, x) >= 0.0;
}

PayoffFamily parse_payoff_family(std::string_view name) {
  if (name == "put") return PayoffFamily::Put;
  if (name == "basket-put") return PayoffFamily::BasketPut;
  if (name == "max-call") return PayoffFamily::MaxCall;
  throw std::invalid_argument("unknown payoff family '" + std::string(name) + "'");
}

std::string to_string(PayoffFamily f) {
  switch (f) {
    case PayoffFamily::Put: return "put";
    case PayoffFamily::BasketPut: return "basket-put";
    case PayoffFamily::MaxCall: return "max-call";
  }
  return "?";
}

}  // namespace rmc
