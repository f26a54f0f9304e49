#pragma once

// Deterministic fork-join map: results are merged in input order regardless of
// scheduling, so outputs are byte-identical run to run. STIELTJES_THREADS caps
// the worker count (default: hardware concurrency).

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace stieltjes {

inline unsigned thread_budget() {
  if (const char* env = std::getenv("STIELTJES_THREADS")) {
    try {
      long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& inputs, Fn fn)
    -> std::vector<decltype(fn(inputs.front()))> {
  using Out = decltype(fn(inputs.front()));
  std::vector<Out> out(inputs.size());
  if (inputs.empty()) return out;
  unsigned workers = std::min<unsigned>(thread_budget(),
                                        static_cast<unsigned>(inputs.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < inputs.size(); ++i) out[i] = fn(inputs[i]);
    return out;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= inputs.size()) break;
        out[i] = fn(inputs[i]);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

}  // namespace stieltjes
