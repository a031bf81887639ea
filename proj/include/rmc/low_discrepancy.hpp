#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rmc {

// Gray-code Sobol' generator with Joe-Kuo direction numbers. The first call
// to next() returns point index 1; the all-zeros point is skipped.
class SobolSequence {
 public:
  static constexpr std::size_t kMaxDim = 21;
  static constexpr int kBits = 52;

  explicit SobolSequence(std::size_t dim);

  std::size_t dim() const { return dim_; }
  void next(std::span<double> out);

 private:
  std::size_t dim_;
  std::uint64_t index_ = 0;
  std::vector<std::uint64_t> directions_;  // dim x kBits
  std::vector<std::uint64_t> state_;
};

// Radical-inverse sequence in the first dim prime bases, starting at index 1.
class HaltonSequence {
 public:
  static constexpr std::size_t kMaxDim = 32;

  explicit HaltonSequence(std::size_t dim);

  std::size_t dim() const { return dim_; }
  void next(std::span<double> out);

 private:
  std::size_t dim_;
  std::uint64_t index_ = 0;
};

double radical_inverse(std::uint64_t index, unsigned base);

}  // namespace rmc
