#pragma once

#include "pitchrl/kernels.hpp"

namespace pitchrl::kernels {

#define PITCHRL_KERNEL_DECLS                                                   \
    double dot(const double* a, const double* b, std::size_t n);               \
    void axpy(double a, const double* x, double* y, std::size_t n);            \
    void gemv(const double* w, const double* b, const double* x, double* y,    \
              std::size_t rows, std::size_t cols);                             \
    void gemv_t_acc(const double* w, const double* d, double* y,               \
                    std::size_t rows, std::size_t cols);                       \
    void ger_acc(double* g, const double* d, const double* x,                  \
                 std::size_t rows, std::size_t cols);                          \
    void adam_update(double* p, double* m, double* v, const double* g,         \
                     std::size_t n, const AdamCoefficients& c);                \
    void sgd_update(double* p, double* vel, const double* g, std::size_t n,    \
                    double lr, double momentum);

namespace scalar {
PITCHRL_KERNEL_DECLS
}

#if defined(PITCHRL_HAVE_AVX2)
namespace avx2 {
PITCHRL_KERNEL_DECLS
}
#endif

#if defined(PITCHRL_HAVE_NEON)
namespace neon {
PITCHRL_KERNEL_DECLS
}
#endif

#undef PITCHRL_KERNEL_DECLS

}  // namespace pitchrl::kernels
