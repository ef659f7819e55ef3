#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace speckleflow::kernels {

/// Compressed sparse row view. Column indices are 32-bit so the AVX2 path
/// can gather directly from them.
struct CsrView {
  std::span<const std::int32_t> row_ptr;
  std::span<const std::int32_t> col;
  std::span<const double> val;
};

/// One variant of every data-parallel inner loop. The scalar table is the
/// reference; every other table must agree with it to rounding.
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// y = x + b * y
  void (*xpby)(const double* x, double b, double* y, std::size_t n);
  /// dst[i] = sum_k taps[k] * src[i + k] for k in [0, ntaps); src holds
  /// n + ntaps - 1 values (already padded by the caller).
  void (*correlate)(const double* src, const double* taps, std::size_t ntaps, double* dst,
                    std::size_t n);
  /// y = A x
  void (*spmv)(const CsrView& a, const double* x, double* y);
};

const KernelTable& scalar_kernels();

/// Best table the running CPU supports, unless SPECKLEFLOW_SIMD=scalar
/// (or the name of another compiled variant) overrides the choice.
const KernelTable& active();

/// Every variant compiled in and runnable on this CPU, scalar first.
std::span<const KernelTable* const> available();

}  // namespace speckleflow::kernels
