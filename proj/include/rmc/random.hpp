#pragma once

#include <cstdint>
#include <random>

namespace rmc {

using Rng = std::mt19937_64;

// Every random draw in the engine comes from a stream named by
// (master seed, exercise-date index, purpose, sub-index). Sub-indices
// separate parallel tasks (one per site, replicate block or path).
enum class Purpose : std::uint32_t {
  Design = 1,
  Replicates = 2,
  Candidates = 3,
  Augment = 4,
  OutOfSample = 5,
  Pilot = 6,
  GlobalPaths = 7,
  Likelihood = 8,
  Run = 9,
};

std::uint64_t splitmix64(std::uint64_t& state);

std::uint64_t stream_seed(std::uint64_t master, int date, Purpose purpose,
                          std::uint64_t sub = 0);

struct StreamKey {
  std::uint64_t seed = 0;
  int date = 0;
  Purpose purpose = Purpose::Design;

  Rng stream(std::uint64_t sub = 0) const {
    return Rng(stream_seed(seed, date, purpose, sub));
  }
};

// Seed for the r-th independent replication of a whole run.
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication);

}  // namespace rmc
