#include "clab/parallel.hpp"
#include "clab/types.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace clab {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Hyperbolicity: return "hyperbolicity";
    case ErrorKind::Continuation: return "continuation";
    case ErrorKind::DomainExit: return "domain-exit";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Positivity: return "positivity";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Extension: return "extension";
    case ErrorKind::WeightTooLarge: return "weight-too-large";
    case ErrorKind::Hypothesis: return "hypothesis";
    case ErrorKind::Envelope: return "envelope";
  }
  return "unknown";
}

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads = n; }

unsigned max_threads() {
  unsigned cap = g_max_threads.load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Failures are kept per index and the lowest one is rethrown, so the
  // reported error does not depend on scheduling.
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto run = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace clab
