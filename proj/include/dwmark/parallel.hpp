// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Tiny static-partition parallel loop. Results must be written to
// caller-owned slots indexed by i so the outcome is identical for any thread
// count.

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "dwmark/common.hpp"

namespace dwmark {

// Runs fn(i) for i in [0, n). threads <= 1 runs inline. The first exception
// thrown by any worker is rethrown on the calling thread after join.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads < 0) throw invalid_argument("parallel_for: negative thread count");
  const std::size_t t =
      std::min<std::size_t>(n, threads <= 1 ? 1 : static_cast<std::size_t>(threads));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        // Strided partition: worker w takes i = w, w+t, w+2t, ...
        for (std::size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dwmark
