#include "kimura_mfg/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace kmfg {
namespace {

std::atomic<int> g_cap{0};

int env_cap() {
  const char* v = std::getenv("KIMURA_MFG_THREADS");
  if (v == nullptr) return 0;
  try {
    const int n = std::stoi(v);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

}  // namespace

int thread_cap() {
  const int explicit_cap = g_cap.load();
  if (explicit_cap > 0) return explicit_cap;
  const int e = env_cap();
  if (e > 0) return e;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_thread_cap(int n) { g_cap.store(n > 0 ? n : 0); }

}  // namespace kmfg
