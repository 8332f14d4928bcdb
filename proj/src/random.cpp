#include "robreg/random.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace robreg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::atomic<unsigned> g_threads{0};

}  // namespace

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd standard_normal_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                     std::uint64_t base_stream) {
  Eigen::MatrixXd out(rows, cols);
  const Eigen::Index blocks = (rows + kMonteCarloBlock - 1) / kMonteCarloBlock;
  parallel_for(blocks, [&](Eigen::Index b) {
    auto eng = make_engine(seed, base_stream + static_cast<std::uint64_t>(b));
    std::normal_distribution<double> nd;
    const Eigen::Index lo = b * kMonteCarloBlock;
    const Eigen::Index hi = std::min(rows, lo + kMonteCarloBlock);
    for (Eigen::Index i = lo; i < hi; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = nd(eng);
  });
  return out;
}

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(Eigen::Index count, const std::function<void(Eigen::Index)>& fn) {
  const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(thread_count(), count));
  if (workers <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Eigen::Index w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Eigen::Index i = next++; i < count; i = next++) fn(i);
    });
  }
}

}  // namespace robreg
