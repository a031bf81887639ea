#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace rmc {

enum class PayoffFamily { Put, BasketPut, MaxCall };

// Discounted exercise payoff h(t, x) = e^{-rt} (intrinsic)_+.
// The payoff reads the first `assets` coordinates of the state; any further
// coordinates (e.g. a volatility factor) are ignored.
struct ContractSpec {
  PayoffFamily family = PayoffFamily::Put;
  double strike = 0.0;
  double rate = 0.0;
  std::size_t assets = 1;

  void validate() const;
};

double payoff(const ContractSpec& c, double t, std::span<const double> x);

// True iff payoff(c, t, x) > 0.
bool itm_indicator(const ContractSpec& c, double t, std::span<const double> x);

// Closed in-the-money region: intrinsic value >= 0, so the at-the-money
// boundary is included.
bool itm_closure(const ContractSpec& c, std::span<const double> x);

PayoffFamily parse_payoff_family(std::string_view name);
std::string to_string(PayoffFamily f);

}  // namespace rmc
