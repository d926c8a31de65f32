#if defined(EVD_HAVE_AVX2)

#include <immintrin.h>

#include "kernels_impl.hpp"

// AVX2 variants, 4 doubles per lane. Only mul/add/div intrinsics are used
// (no FMA) and the operation order matches warp_scalar.cpp exactly, so the
// results are bit-equal with the reference. Tails fall through to the scalar
// kernel.

namespace evd::kernels::detail {

void warp_projective_avx2(const double H[9], const double* xs,
                          const double* ys, std::size_t n, double* us,
                          double* vs, double* ws) {
    const __m256d h0 = _mm256_set1_pd(H[0]), h1 = _mm256_set1_pd(H[1]),
                  h2 = _mm256_set1_pd(H[2]);
    const __m256d h3 = _mm256_set1_pd(H[3]), h4 = _mm256_set1_pd(H[4]),
                  h5 = _mm256_set1_pd(H[5]);
    const __m256d h6 = _mm256_set1_pd(H[6]), h7 = _mm256_set1_pd(H[7]),
                  h8 = _mm256_set1_pd(H[8]);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(xs + i);
        const __m256d y = _mm256_loadu_pd(ys + i);
        const __m256d un = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(h0, x), _mm256_mul_pd(h1, y)), h2);
        const __m256d vn = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(h3, x), _mm256_mul_pd(h4, y)), h5);
        const __m256d w = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(h6, x), _mm256_mul_pd(h7, y)), h8);
        _mm256_storeu_pd(us + i, _mm256_div_pd(un, w));
        _mm256_storeu_pd(vs + i, _mm256_div_pd(vn, w));
        _mm256_storeu_pd(ws + i, w);
    }
    if (i < n)
        warp_projective_scalar(H, xs + i, ys + i, n - i, us + i, vs + i, ws + i);
}

void warp_translate_avx2(const PinholeK& k, const double off[3],
                         const double* xs, const double* ys, const double* ds,
                         std::size_t n, double* us, double* vs, double* zs) {
    const double inv_fx_s = 1.0 / k.fx;
    const double inv_fy_s = 1.0 / k.fy;
    const __m256d fx = _mm256_set1_pd(k.fx), fy = _mm256_set1_pd(k.fy);
    const __m256d cx = _mm256_set1_pd(k.cx), cy = _mm256_set1_pd(k.cy);
    const __m256d inv_fx = _mm256_set1_pd(inv_fx_s);
    const __m256d inv_fy = _mm256_set1_pd(inv_fy_s);
    const __m256d ox = _mm256_set1_pd(off[0]);
    const __m256d oy = _mm256_set1_pd(off[1]);
    const __m256d oz = _mm256_set1_pd(off[2]);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(xs + i);
        const __m256d y = _mm256_loadu_pd(ys + i);
        const __m256d d = _mm256_loadu_pd(ds + i);
        const __m256d X =
            _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(x, cx), inv_fx), d);
        const __m256d Y =
            _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(y, cy), inv_fy), d);
        const __m256d Pz = _mm256_add_pd(d, oz);
        const __m256d u = _mm256_add_pd(
            _mm256_mul_pd(fx, _mm256_div_pd(_mm256_add_pd(X, ox), Pz)), cx);
        const __m256d v = _mm256_add_pd(
            _mm256_mul_pd(fy, _mm256_div_pd(_mm256_add_pd(Y, oy), Pz)), cy);
        _mm256_storeu_pd(us + i, u);
        _mm256_storeu_pd(vs + i, v);
        _mm256_storeu_pd(zs + i, Pz);
    }
    if (i < n)
        warp_translate_scalar(k, off, xs + i, ys + i, ds + i, n - i, us + i,
                              vs + i, zs + i);
}

}  // namespace evd::kernels::detail

#endif  // EVD_HAVE_AVX2
