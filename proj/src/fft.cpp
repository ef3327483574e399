#include "rdm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace rdm::fft {
namespace {

enum class Kind { kForward2d, kBackward2d, kR2c2d, kC2r2d, kR2cRows, kC2rRows };

using Key = std::tuple<Kind, int, int, int>;

// Planning is not thread-safe in FFTW; execution of a finished plan is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct PlanCache {
  std::map<Key, fftw_plan> plans;
  ~PlanCache() {
    for (auto& [key, plan] : plans) fftw_destroy_plan(plan);
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

fftw_complex* as_fftw(cdouble* p) { return reinterpret_cast<fftw_complex*>(p); }

fftw_plan make_plan(const Key& key) {
  auto [kind, n0, n1, howmany] = key;
  const unsigned flags = FFTW_ESTIMATE;
  switch (kind) {
    case Kind::kForward2d:
    case Kind::kBackward2d: {
      CVector buf(static_cast<std::size_t>(n0) * n1);
      return fftw_plan_dft_2d(n0, n1, as_fftw(buf.data()), as_fftw(buf.data()),
                              kind == Kind::kForward2d ? FFTW_FORWARD
                                                       : FFTW_BACKWARD,
                              flags);
    }
    case Kind::kR2c2d: {
      RVector in(static_cast<std::size_t>(n0) * n1);
      CVector out(static_cast<std::size_t>(n0) * (n1 / 2 + 1));
      return fftw_plan_dft_r2c_2d(n0, n1, in.data(), as_fftw(out.data()), flags);
    }
    case Kind::kC2r2d: {
      CVector in(static_cast<std::size_t>(n0) * (n1 / 2 + 1));
      RVector out(static_cast<std::size_t>(n0) * n1);
      return fftw_plan_dft_c2r_2d(n0, n1, as_fftw(in.data()), out.data(), flags);
    }
    case Kind::kR2cRows: {
      const int nc = n0 / 2 + 1;
      RVector in(static_cast<std::size_t>(n0) * howmany);
      CVector out(static_cast<std::size_t>(nc) * howmany);
      return fftw_plan_many_dft_r2c(1, &n0, howmany, in.data(), nullptr, 1, n0,
                                    as_fftw(out.data()), nullptr, 1, nc, flags);
    }
    case Kind::kC2rRows: {
      const int nc = n0 / 2 + 1;
      CVector in(static_cast<std::size_t>(nc) * howmany);
      RVector out(static_cast<std::size_t>(n0) * howmany);
      return fftw_plan_many_dft_c2r(1, &n0, howmany, as_fftw(in.data()), nullptr,
                                    1, nc, out.data(), nullptr, 1, n0, flags);
    }
  }
  return nullptr;
}

fftw_plan plan_for(Kind kind, int n0, int n1, int howmany) {
  Key key{kind, n0, n1, howmany};
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto& plans = cache().plans;
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  fftw_plan plan = make_plan(key);
  plans.emplace(key, plan);
  return plan;
}

}  // namespace

void* aligned_alloc_bytes(std::size_t bytes) {
  return fftw_malloc(bytes == 0 ? 1 : bytes);
}

void aligned_free(void* p) { fftw_free(p); }

void forward_2d(CVector& data, int rows, int cols) {
  fftw_execute_dft(plan_for(Kind::kForward2d, rows, cols, 1),
                   as_fftw(data.data()), as_fftw(data.data()));
}

void backward_2d(CVector& data, int rows, int cols) {
  fftw_execute_dft(plan_for(Kind::kBackward2d, rows, cols, 1),
                   as_fftw(data.data()), as_fftw(data.data()));
}

void r2c_2d(const RVector& in, CVector& out, int rows, int cols) {
  out.resize(static_cast<std::size_t>(rows) * (cols / 2 + 1));
  fftw_execute_dft_r2c(plan_for(Kind::kR2c2d, rows, cols, 1),
                       const_cast<double*>(in.data()), as_fftw(out.data()));
}

void c2r_2d(CVector& in, RVector& out, int rows, int cols) {
  out.resize(static_cast<std::size_t>(rows) * cols);
  fftw_execute_dft_c2r(plan_for(Kind::kC2r2d, rows, cols, 1),
                       as_fftw(in.data()), out.data());
}

void r2c_rows(const RVector& in, CVector& out, int n, int howmany) {
  out.resize(static_cast<std::size_t>(n / 2 + 1) * howmany);
  fftw_execute_dft_r2c(plan_for(Kind::kR2cRows, n, 0, howmany),
                       const_cast<double*>(in.data()), as_fftw(out.data()));
}

void c2r_rows(CVector& in, RVector& out, int n, int howmany) {
  out.resize(static_cast<std::size_t>(n) * howmany);
  fftw_execute_dft_c2r(plan_for(Kind::kC2rRows, n, 0, howmany),
                       as_fftw(in.data()), out.data());
}

int good_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace rdm::fft
