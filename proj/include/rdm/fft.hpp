#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <vector>

namespace rdm::fft {

using cdouble = std::complex<double>;

void* aligned_alloc_bytes(std::size_t bytes);
void aligned_free(void* p);

// Allocator that hands out FFTW-aligned storage so cached plans can be
// executed on any buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    void* p = aligned_alloc_bytes(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { aligned_free(p); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using CVector = std::vector<cdouble, AlignedAllocator<cdouble>>;
using RVector = std::vector<double, AlignedAllocator<double>>;

// Unnormalized in-place 2D complex transform; forward uses exp(-i...).
void forward_2d(CVector& data, int rows, int cols);
void backward_2d(CVector& data, int rows, int cols);

// 2D real-to-complex; out has rows x (cols/2 + 1) entries.
void r2c_2d(const RVector& in, CVector& out, int rows, int cols);
// Inverse of r2c_2d without the 1/(rows*cols) factor. `in` is clobbered.
void c2r_2d(CVector& in, RVector& out, int rows, int cols);

// Batched 1D transforms over `howmany` contiguous rows of length n.
void r2c_rows(const RVector& in, CVector& out, int n, int howmany);
void c2r_rows(CVector& in, RVector& out, int n, int howmany);

// Fast transform length >= n with only factors 2, 3, 5.
int good_size(int n);

}  // namespace rdm::fft
