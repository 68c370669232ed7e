#include "pagn/common.hpp"

#include <cstdlib>

namespace pagn {

namespace {
int g_threads = 0;  // 0 = not yet resolved
}

int worker_threads() {
  if (g_threads == 0) {
    int n = 1;
    if (const char* env = std::getenv("PAGN_THREADS")) {
      n = std::atoi(env);
      if (n < 1) n = 1;
      if (n > 64) n = 64;
    }
    g_threads = n;
  }
  return g_threads;
}

void set_worker_threads(int n) { g_threads = n < 1 ? 1 : n; }

}  // namespace pagn
