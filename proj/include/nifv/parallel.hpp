// include/nifv/parallel.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef NIFV_PARALLEL_HPP_
#define NIFV_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nifv {

inline int ResolveThreads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for every i in [0, n). Items must only write state they own;
// the schedule carries no ordering guarantee.
template <class Fn>
void ParallelFor(std::int64_t n, int threads, Fn&& fn) {
  threads = ResolveThreads(threads);
  if (threads <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next(0);
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&]() {
    try {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!err) err = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Splits [0, n) into fixed-size blocks, evaluates each block independently,
// and combines the block results pairwise over the block index. The block
// size does not depend on the thread count, so the float result is bitwise
// identical for any `threads`.
template <class Acc, class EvalBlock, class Combine>
Acc BlockedReduce(std::int64_t n, std::int64_t block, int threads,
                  EvalBlock&& eval_block, Combine&& combine) {
  if (n <= 0) return eval_block(0, 0);
  const std::int64_t nblocks = (n + block - 1) / block;
  std::vector<Acc> acc(static_cast<std::size_t>(nblocks));
  ParallelFor(nblocks, threads, [&](std::int64_t b) {
    const std::int64_t lo = b * block;
    acc[static_cast<std::size_t>(b)] = eval_block(lo, std::min(n, lo + block));
  });
  for (std::int64_t stride = 1; stride < nblocks; stride *= 2) {
    const std::int64_t pairs = (nblocks - stride + 2 * stride - 1) / (2 * stride);
    ParallelFor(pairs, threads, [&](std::int64_t j) {
      const std::int64_t i = 2 * stride * j;
      if (i + stride < nblocks) {
        acc[static_cast<std::size_t>(i)] =
            combine(std::move(acc[static_cast<std::size_t>(i)]),
                    std::move(acc[static_cast<std::size_t>(i + stride)]));
      }
    });
  }
  return std::move(acc[0]);
}

}  // namespace nifv

#endif  // NIFV_PARALLEL_HPP_
