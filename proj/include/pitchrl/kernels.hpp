#pragma once

// Dense double-precision kernels used by the policy network and the
// optimizers. Every kernel has a portable scalar reference implementation;
// AVX2 (x86-64) and NEON (aarch64) variants are selected once at runtime.
//
// Elementwise kernels (axpy, adam_update, sgd_update) are bit-identical
// across backends. Reductions (dot, gemv, gemv_t_acc) may differ in the last
// few ulps.

#include <cstddef>
#include <span>
#include <string_view>

namespace pitchrl::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

// Raw-pointer kernel table. Sizes are element counts; matrices are row-major.
struct KernelTable {
    Backend backend;
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = W x + b, W is rows x cols
    void (*gemv)(const double* w, const double* b, const double* x, double* y,
                 std::size_t rows, std::size_t cols);
    // y += W^T d, y has cols entries
    void (*gemv_t_acc)(const double* w, const double* d, double* y,
                       std::size_t rows, std::size_t cols);
    // G += d x^T
    void (*ger_acc)(double* g, const double* d, const double* x,
                    std::size_t rows, std::size_t cols);
    void (*adam_update)(double* p, double* m, double* v, const double* g,
                        std::size_t n, const AdamCoefficients& c);
    // vel = momentum * vel + g; p -= lr * vel  (vel may be null when momentum == 0)
    void (*sgd_update)(double* p, double* vel, const double* g, std::size_t n,
                       double lr, double momentum);
};

const KernelTable& scalar_table();
bool backend_available(Backend b);
// Throws std::invalid_argument when the backend is not compiled in or the CPU
// lacks the instruction set.
const KernelTable& table_for(Backend b);

// Process-wide table. Chosen on first use: the best available backend, or the
// one named by PITCHRL_KERNELS=scalar|avx2|neon.
const KernelTable& active();
Backend active_backend();
// Replace the process-wide table. Not synchronized with concurrent kernel
// calls; intended for tests and tool start-up.
void set_active_backend(Backend b);

std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view name);

// span wrappers over the active table

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}

inline void gemv(std::span<const double> w, std::span<const double> b,
                 std::span<const double> x, std::span<double> y) {
    active().gemv(w.data(), b.data(), x.data(), y.data(), y.size(), x.size());
}

inline void gemv_t_acc(std::span<const double> w, std::span<const double> d,
                       std::span<double> y) {
    active().gemv_t_acc(w.data(), d.data(), y.data(), d.size(), y.size());
}

inline void ger_acc(std::span<double> g, std::span<const double> d,
                    std::span<const double> x) {
    active().ger_acc(g.data(), d.data(), x.data(), d.size(), x.size());
}

}  // namespace pitchrl::kernels
