// Core scalar/matrix aliases and error types shared by the whole library.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace reverie {

// All tensors in the library are 2-D row-major matrices. Higher-rank data
// (images, token batches, sequences) is laid out by convention and carried
// alongside small metadata structs where the geometry matters.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PreconditionError : std::logic_error {
  explicit PreconditionError(const std::string& msg) : std::logic_error(msg) {}
};

// Raised when a loss or activation goes non-finite; carries a short
// diagnostic so the trainer can dump context before aborting.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tape execution allocates and frees many multi-megabyte buffers per step;
// keeping glibc from routing those through mmap/munmap is worth ~40% of a
// training step. Call once at program start.
inline void runtime_init() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

inline void require_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace reverie
