#include "covec/parallel.hpp"

#include <atomic>
#include <string>

namespace covec {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t env_threads() {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("COVEC_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) hw = std::min<std::size_t>(hw, static_cast<std::size_t>(cap));
    } catch (...) {
      // ignore unparsable values
    }
  }
  return hw;
}

}  // namespace

std::size_t max_threads() {
  const std::size_t o = g_override.load();
  return o != 0 ? o : env_threads();
}

void set_max_threads(std::size_t n) { g_override.store(n); }

}  // namespace covec
