#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsideconv {

// Base class of every exception thrown by this library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/size mismatch between cubes, kernels or frequency planes.
class dimension_error : public error {
 public:
  using error::error;
};

// Invalid parameter in a kernel/noise/solver/training specification.
class spec_error : public error {
 public:
  using error::error;
};

// Malformed file content. Carries the byte offset where parsing failed.
class format_error : public error {
 public:
  format_error(const std::string& what, std::size_t byte_offset)
      : error(what + " (byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Denoising network weights that violate the architecture invariants.
class weights_error : public error {
 public:
  using error::error;
};

// Residual with zero Frobenius norm: the normalized autocorrelation is undefined.
class degenerate_residual_error : public error {
 public:
  using error::error;
};

// Quadratic data-fit solve requested with a non-invertible system.
class singular_system_error : public error {
 public:
  using error::error;
};

// Quality metric undefined for this reference image.
class metric_error : public error {
 public:
  using error::error;
};

// Training dataset unusable (empty, or no cube fits the patch size).
class data_error : public error {
 public:
  using error::error;
};

}  // namespace hsideconv
