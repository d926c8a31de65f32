#pragma once

#include "evd/kernels.hpp"

// Backend entry points. Every variant must evaluate the expression tree
// written out in the scalar kernels, operation for operation, without fused
// multiply-add, so results are bit-equal across backends.

namespace evd::kernels::detail {

void warp_projective_scalar(const double H[9], const double* xs,
                            const double* ys, std::size_t n, double* us,
                            double* vs, double* ws);

void warp_translate_scalar(const PinholeK& k, const double off[3],
                           const double* xs, const double* ys,
                           const double* ds, std::size_t n, double* us,
                           double* vs, double* zs);

#if defined(EVD_HAVE_AVX2)
void warp_projective_avx2(const double H[9], const double* xs,
                          const double* ys, std::size_t n, double* us,
                          double* vs, double* ws);

void warp_translate_avx2(const PinholeK& k, const double off[3],
                         const double* xs, const double* ys, const double* ds,
                         std::size_t n, double* us, double* vs, double* zs);
#endif

}  // namespace evd::kernels::detail
