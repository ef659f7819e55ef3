// AArch64 variants. NEON is mandatory on AArch64, so no runtime probe is needed.

#include <arm_neon.h>

#include "variants.hpp"

namespace speckleflow::kernels {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void xpby_neon(const double* x, double b, double* y, std::size_t n) {
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(x + i), vb, vld1q_f64(y + i)));
  for (; i < n; ++i) y[i] = x[i] + b * y[i];
}

void correlate_neon(const double* src, const double* taps, std::size_t ntaps, double* dst,
                    std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t k = 0; k < ntaps; ++k) acc = vfmaq_n_f64(acc, vld1q_f64(src + i + k), taps[k]);
    vst1q_f64(dst + i, acc);
  }
  for (; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < ntaps; ++k) s += taps[k] * src[i + k];
    dst[i] = s;
  }
}

void spmv_neon(const CsrView& a, const double* x, double* y) {
  const std::size_t rows = a.row_ptr.size() - 1;
  for (std::size_t r = 0; r < rows; ++r) {
    std::int32_t k = a.row_ptr[r];
    const std::int32_t end = a.row_ptr[r + 1];
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; k + 2 <= end; k += 2) {
      const double gathered[2] = {x[a.col[k]], x[a.col[k + 1]]};
      acc = vfmaq_f64(acc, vld1q_f64(a.val.data() + k), vld1q_f64(gathered));
    }
    double s = vaddvq_f64(acc);
    for (; k < end; ++k) s += a.val[k] * x[a.col[k]];
    y[r] = s;
  }
}

}  // namespace

const KernelTable& neon_kernels() {
  static const KernelTable table{"neon", dot_neon, axpy_neon, xpby_neon, correlate_neon,
                                 spmv_neon};
  return table;
}

}  // namespace speckleflow::kernels
