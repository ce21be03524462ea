#include "spdcsim/common.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spdc {

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("SPDCSIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

std::atomic<unsigned> g_threads{default_threads()};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void set_thread_count(unsigned n) { g_threads = std::max(1u, n); }
unsigned thread_count() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ block);
}

double fwhm_linear(const double* x, const double* y, std::size_t n) {
  if (n < 3) throw InvalidInput("fwhm: need at least 3 samples");
  const std::size_t peak = static_cast<std::size_t>(std::max_element(y, y + n) - y);
  const double half = 0.5 * y[peak];
  if (!(half > 0.0)) throw InvalidInput("fwhm: profile has no positive peak");
  std::size_t lo = peak;
  while (lo > 0 && y[lo - 1] >= half) --lo;
  std::size_t hi = peak;
  while (hi + 1 < n && y[hi + 1] >= half) ++hi;
  if (lo == 0 || hi + 1 == n) throw InvalidInput("fwhm: profile does not drop below half maximum inside the window");
  auto cross = [&](std::size_t a, std::size_t b) {
    return x[a] + (half - y[a]) / (y[b] - y[a]) * (x[b] - x[a]);
  };
  return std::abs(cross(hi, hi + 1) - cross(lo - 1, lo));
}

}  // namespace spdc
