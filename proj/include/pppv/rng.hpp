#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace pppv {

using Rng = std::mt19937_64;

/// Seed for an independent stream, derived from a master seed and a path of
/// counters. Task-level seeds never depend on scheduling, so parallel and
/// sequential runs draw identical numbers.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline Rng make_rng(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
  return Rng(derive_seed(master, a, b, c));
}

/// Runs `task(i)` for i in [0, count) on up to `threads` workers. Each index
/// is claimed exactly once; tasks must write only to their own slot.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

}  // namespace pppv
