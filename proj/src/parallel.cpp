#include "agrsst/parallel.hpp"

#include <atomic>

namespace agrsst {

namespace {
std::atomic<std::size_t> g_default_threads{0};
}

std::size_t default_threads() {
  const std::size_t n = g_default_threads.load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void set_default_threads(std::size_t n) { g_default_threads.store(n); }

} // namespace agrsst
