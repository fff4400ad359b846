#ifndef GZSL_ALLOCATOR_HPP
#define GZSL_ALLOCATOR_HPP

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gzsl {

/// Keeps large graph buffers on the heap instead of mmap/munmap per batch.
/// Training otherwise spends a large share of its time in page faults.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace gzsl

#endif  // GZSL_ALLOCATOR_HPP
