#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace bd {

// Worker count: BD_NUM_THREADS if set, otherwise hardware concurrency.
std::size_t default_worker_count();

// Runs body(i) for i in [0, n) on up to `workers` threads. Tasks must write to
// disjoint slots; reductions happen afterwards in index order so results do
// not depend on the worker count.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

// Fixed-order pairwise summation; deterministic and accurate for ensemble
// reductions.
double pairwise_sum(std::span<const double> xs);

}  // namespace bd
