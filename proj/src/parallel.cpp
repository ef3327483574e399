#include "rdm/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace rdm {
namespace {

int threads_from_env() {
  const char* env = std::getenv("RDM_THREADS");
  if (env == nullptr) return omp_get_max_threads();
  try {
    int n = std::stoi(env);
    return n > 0 ? n : 1;
  } catch (...) {
    return 1;
  }
}

std::atomic<int>& cap() {
  static std::atomic<int> n{threads_from_env()};
  return n;
}

}  // namespace

int thread_count() { return cap().load(); }

void set_thread_count(int n) { cap().store(n > 0 ? n : 1); }

}  // namespace rdm
