#include <iostream>

#include "ganreg/cli/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees many same-sized matrices of a few hundred KB;
  // keep them on the heap instead of mmap/munmap plus page faults per call.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return ganreg::cli::run(argc, argv, std::cout, std::cerr);
}
