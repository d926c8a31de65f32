#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace evd::kernels {
namespace {

struct Ops {
    Backend backend;
    void (*projective)(const double[9], const double*, const double*,
                       std::size_t, double*, double*, double*);
    void (*translate)(const PinholeK&, const double[3], const double*,
                      const double*, const double*, std::size_t, double*,
                      double*, double*);
};

constexpr Ops kScalarOps{Backend::scalar, detail::warp_projective_scalar,
                         detail::warp_translate_scalar};

#if defined(EVD_HAVE_AVX2)
constexpr Ops kAvx2Ops{Backend::avx2, detail::warp_projective_avx2,
                       detail::warp_translate_avx2};
#endif

bool cpu_has_avx2() {
#if defined(EVD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const Ops* ops_for(Backend b) {
#if defined(EVD_HAVE_AVX2)
    if (b == Backend::avx2) return &kAvx2Ops;
#endif
    return &kScalarOps;
}

Backend detect_backend() {
    if (const char* env = std::getenv("EVD_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::avx2))
            return Backend::avx2;
    }
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::mutex g_mutex;
std::atomic<const Ops*> g_ops{nullptr};

const Ops* active_ops() {
    const Ops* p = g_ops.load(std::memory_order_acquire);
    if (p) return p;
    std::lock_guard<std::mutex> lock(g_mutex);
    p = g_ops.load(std::memory_order_relaxed);
    if (!p) {
        p = ops_for(detect_backend());
        g_ops.store(p, std::memory_order_release);
    }
    return p;
}

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return cpu_has_avx2();
    }
    return false;
}

Backend active_backend() { return active_ops()->backend; }

void force_backend(std::optional<Backend> b) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (!b) {
        g_ops.store(ops_for(detect_backend()), std::memory_order_release);
        return;
    }
    if (!backend_available(*b))
        throw std::runtime_error(std::string("kernel backend unavailable: ") +
                                 backend_name(*b));
    g_ops.store(ops_for(*b), std::memory_order_release);
}

void warp_projective(const double H[9], const double* xs, const double* ys,
                     std::size_t n, double* us, double* vs, double* ws) {
    active_ops()->projective(H, xs, ys, n, us, vs, ws);
}

void warp_translate(const PinholeK& k, const double off[3], const double* xs,
                    const double* ys, const double* ds, std::size_t n,
                    double* us, double* vs, double* zs) {
    active_ops()->translate(k, off, xs, ys, ds, n, us, vs, zs);
}

}  // namespace evd::kernels
