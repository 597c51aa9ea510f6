#include "steinflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace steinflow {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t default_workers() {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STEINFLOW_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) workers = std::min(workers, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // Malformed values are ignored.
    }
  }
  return workers;
}

}  // namespace

std::size_t worker_count() {
  const std::size_t forced = g_override.load();
  if (forced != 0) return forced;
  static const std::size_t from_env = default_workers();
  return from_env;
}

void set_worker_count(std::size_t workers) { g_override.store(workers); }

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk) {
  if (count == 0) return;
  const std::size_t chunk_floor = std::max<std::size_t>(1, min_chunk);
  const std::size_t workers =
      std::min(worker_count(), (count + chunk_floor - 1) / chunk_floor);
  if (workers <= 1) {
    body(0, count);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  const std::size_t per = (count + workers - 1) / workers;
  auto run = [&](std::size_t begin, std::size_t end) {
    try {
      body(begin, end);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * per;
    const std::size_t end = std::min(count, begin + per);
    if (begin >= end) break;
    threads.emplace_back(run, begin, end);
  }
  run(0, std::min(count, per));
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace steinflow
