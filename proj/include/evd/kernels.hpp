#pragma once

#include <cstddef>
#include <optional>

namespace evd::kernels {

/// Warp kernel backends. The scalar kernels are the reference; the AVX2
/// variants evaluate the identical expression tree (no FMA contraction) so
/// both backends produce bit-equal results.
enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);

/// Backend currently used by the warp entry points.
Backend active_backend();

/// Pin the backend (tests, config). nullopt restores auto-detection, which
/// also honours the EVD_KERNELS environment variable (`scalar` or `avx2`).
void force_backend(std::optional<Backend> b);

struct PinholeK {
    double fx, fy, cx, cy;
};

/// Projective pixel warp: (us, vs) = dehomogenize(H * [x y 1]^T) with H
/// row-major. `ws` receives the homogeneous denominator; entries with
/// ws <= 0 left the image plane and must be dropped by the caller.
void warp_projective(const double H[9], const double* xs, const double* ys,
                     std::size_t n, double* us, double* vs, double* ws);

/// Metric pixel warp: backproject each pixel with its depth `ds`, add the
/// camera-frame offset `off`, reproject. `zs` receives the shifted depth;
/// entries with zs <= 0 must be dropped by the caller.
void warp_translate(const PinholeK& k, const double off[3], const double* xs,
                    const double* ys, const double* ds, std::size_t n,
                    double* us, double* vs, double* zs);

}  // namespace evd::kernels
