#include "rmc/random.hpp"

#include "rmc/parallel.hpp"

namespace rmc {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, int date, Purpose purpose,
                          std::uint64_t sub) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  state = h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(date)) << 32 |
               static_cast<std::uint32_t>(purpose));
  h = splitmix64(state);
  state = h ^ sub;
  return splitmix64(state);
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication) {
  return stream_seed(master, -1, Purpose::Run, replication);
}

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n != 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace rmc
