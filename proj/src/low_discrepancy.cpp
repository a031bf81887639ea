#include "rmc/low_discrepancy.hpp"

#include <array>
#include <bit>
#include <stdexcept>
#include <string>

namespace rmc {

namespace {

// Joe & Kuo (2008) primitive polynomials and initial direction numbers for
// dimensions 2..21. Degree s, coefficient bits a, initial m_1..m_s.
struct DirectionEntry {
  unsigned s;
  unsigned a;
  std::array<unsigned, 8> m;
};

constexpr std::array<DirectionEntry, 20> kJoeKuo = {{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
}};

constexpr std::array<unsigned, HaltonSequence::kMaxDim> kPrimes = {
    2,  3,  5,  7,  11, 13, 17, 19, 23, 29,  31,  37,  41,  43,  47,  53,
    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

}  // namespace

SobolSequence::SobolSequence(std::size_t dim)
    : dim_(dim), directions_(dim * kBits), state_(dim, 0) {
  if (dim == 0 || dim > kMaxDim)
    throw std::invalid_argument("sobol: dimension must be in [1, " + std::to_string(kMaxDim) +
                                "]");
  for (std::size_t j = 0; j < dim; ++j) {
    std::uint64_t* v = &directions_[j * kBits];
    if (j == 0) {
      for (int i = 0; i < kBits; ++i) v[i] = std::uint64_t{1} << (kBits - 1 - i);
      continue;
    }
    const auto& e = kJoeKuo[j - 1];
    const int s = static_cast<int>(e.s);
    for (int i = 0; i < s && i < kBits; ++i)
      v[i] = static_cast<std::uint64_t>(e.m[i]) << (kBits - 1 - i);
    for (int i = s; i < kBits; ++i) {
      v[i] = v[i - s] ^ (v[i - s] >> s);
      for (int k = 1; k < s; ++k)
        if ((e.a >> (s - 1 - k)) & 1u) v[i] ^= v[i - k];
    }
  }
}

void SobolSequence::next(std::span<double> out) {
  // Gray-code update: flip the direction number of the lowest zero bit of
  // the previous index.
  const int c = std::countr_one(index_);
  if (c >= kBits) throw std::overflow_error("sobol: sequence exhausted");
  ++index_;
  constexpr double scale = 1.0 / static_cast<double>(std::uint64_t{1} << kBits);
  for (std::size_t j = 0; j < dim_; ++j) {
    state_[j] ^= directions_[j * kBits + static_cast<std::size_t>(c)];
    out[j] = static_cast<double>(state_[j]) * scale;
  }
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

HaltonSequence::HaltonSequence(std::size_t dim) : dim_(dim) {
  if (dim == 0 || dim > kMaxDim)
    throw std::invalid_argument("halton: dimension must be in [1, " + std::to_string(kMaxDim) +
                                "]");
}

void HaltonSequence::next(std::span<double> out) {
  ++index_;
  for (std::size_t j = 0; j < dim_; ++j) out[j] = radical_inverse(index_, kPrimes[j]);
}

}  // namespace rmc
