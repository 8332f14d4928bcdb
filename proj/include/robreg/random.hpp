#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace robreg {

/// Deterministic engine for a (seed, stream) pair. Every random quantity in
/// the library is drawn from a stream identified this way, so results do not
/// depend on scheduling or thread count.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream);

/// Well-known stream ids. Replicate- and block-indexed streams are offset from
/// these bases.
namespace streams {
inline constexpr std::uint64_t beta = 1;
inline constexpr std::uint64_t sigma = 2;
inline constexpr std::uint64_t design = 3;
inline constexpr std::uint64_t calibration = 10;
inline constexpr std::uint64_t asymptotic = 11;
inline constexpr std::uint64_t cv_shuffle = 12;
inline constexpr std::uint64_t replicate_base = 1u << 20;
inline constexpr std::uint64_t block_base = 1u << 30;
}  // namespace streams

/// Draws per Monte Carlo block; one engine stream per block.
inline constexpr Eigen::Index kMonteCarloBlock = 4096;

/// rows × cols matrix of iid N(0,1), filled block-by-block of kMonteCarloBlock
/// rows, block b drawn from stream (seed, base + b).
Eigen::MatrixXd standard_normal_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                     std::uint64_t base_stream);

/// Number of worker threads used by parallel loops (0 = hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs fn(i) for i in [0, count) across the worker pool. Callers write into
/// per-index slots and reduce in index order afterwards.
void parallel_for(Eigen::Index count, const std::function<void(Eigen::Index)>& fn);

}  // namespace robreg
