#include "kernels_impl.hpp"

// Reference kernels. This translation unit is built for the baseline target
// (no AVX2, no FMA); keep the arithmetic order in sync with warp_avx2.cpp.

namespace evd::kernels::detail {

void warp_projective_scalar(const double H[9], const double* xs,
                            const double* ys, std::size_t n, double* us,
                            double* vs, double* ws) {
    const double h0 = H[0], h1 = H[1], h2 = H[2];
    const double h3 = H[3], h4 = H[4], h5 = H[5];
    const double h6 = H[6], h7 = H[7], h8 = H[8];
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xs[i];
        const double y = ys[i];
        const double un = (h0 * x + h1 * y) + h2;
        const double vn = (h3 * x + h4 * y) + h5;
        const double w = (h6 * x + h7 * y) + h8;
        us[i] = un / w;
        vs[i] = vn / w;
        ws[i] = w;
    }
}

void warp_translate_scalar(const PinholeK& k, const double off[3],
                           const double* xs, const double* ys,
                           const double* ds, std::size_t n, double* us,
                           double* vs, double* zs) {
    const double inv_fx = 1.0 / k.fx;
    const double inv_fy = 1.0 / k.fy;
    const double ox = off[0], oy = off[1], oz = off[2];
    for (std::size_t i = 0; i < n; ++i) {
        const double d = ds[i];
        const double X = ((xs[i] - k.cx) * inv_fx) * d;
        const double Y = ((ys[i] - k.cy) * inv_fy) * d;
        const double Pz = d + oz;
        us[i] = k.fx * ((X + ox) / Pz) + k.cx;
        vs[i] = k.fy * ((Y + oy) / Pz) + k.cy;
        zs[i] = Pz;
    }
}

}  // namespace evd::kernels::detail
