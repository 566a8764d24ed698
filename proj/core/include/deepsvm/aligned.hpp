#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace deepsvm {

/// Cache-line aligned storage. Vectorized kernels choose their traversal from
/// the operand address, so weight and gradient buffers need a fixed alignment
/// for results to be bit-reproducible across allocations and processes.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }

  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) noexcept { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

}  // namespace deepsvm
