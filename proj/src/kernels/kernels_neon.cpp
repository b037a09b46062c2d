// aarch64 only. Advanced SIMD is mandatory on aarch64, so no runtime probe.
#include "kernels_impl.hpp"

#include <arm_neon.h>

#include <cmath>

namespace pitchrl::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + dot(w + r * cols, x, cols);
}

void gemv_t_acc(const double* w, const double* d, double* y, std::size_t rows,
                std::size_t cols) {
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
        float64x2_t acc = vld1q_f64(y + c);
        for (std::size_t r = 0; r < rows; ++r) {
            acc = vfmaq_n_f64(acc, vld1q_f64(w + r * cols + c), d[r]);
        }
        vst1q_f64(y + c, acc);
    }
    for (; c < cols; ++c) {
        double s = y[c];
        for (std::size_t r = 0; r < rows; ++r) s += d[r] * w[r * cols + c];
        y[c] = s;
    }
}

void ger_acc(double* g, const double* d, const double* x, std::size_t rows,
             std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy(d[r], x, g + r * cols, cols);
}

void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, const AdamCoefficients& c) {
    const float64x2_t b1 = vdupq_n_f64(c.beta1);
    const float64x2_t b2 = vdupq_n_f64(c.beta2);
    const float64x2_t omb1 = vdupq_n_f64(1.0 - c.beta1);
    const float64x2_t omb2 = vdupq_n_f64(1.0 - c.beta2);
    const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
    const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
    const float64x2_t lr = vdupq_n_f64(c.lr);
    const float64x2_t eps = vdupq_n_f64(c.eps);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t gv = vld1q_f64(g + i);
        const float64x2_t mv = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, gv));
        const float64x2_t vv =
            vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(omb2, vmulq_f64(gv, gv)));
        vst1q_f64(m + i, mv);
        vst1q_f64(v + i, vv);
        const float64x2_t step = vdivq_f64(vmulq_f64(lr, vdivq_f64(mv, bc1)),
                                           vaddq_f64(vsqrtq_f64(vdivq_f64(vv, bc2)), eps));
        vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (g[i] * g[i]);
        const double m_hat = m[i] / c.bias_correction1;
        const double v_hat = v[i] / c.bias_correction2;
        p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

void sgd_update(double* p, double* vel, const double* g, std::size_t n,
                double lr, double momentum) {
    if (vel == nullptr || momentum == 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            p[i] -= lr * g[i];
            if (vel != nullptr) vel[i] = g[i];
        }
        return;
    }
    const float64x2_t vlr = vdupq_n_f64(lr);
    const float64x2_t mu = vdupq_n_f64(momentum);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vv = vaddq_f64(vmulq_f64(mu, vld1q_f64(vel + i)), vld1q_f64(g + i));
        vst1q_f64(vel + i, vv);
        vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), vmulq_f64(vlr, vv)));
    }
    for (; i < n; ++i) {
        vel[i] = momentum * vel[i] + g[i];
        p[i] -= lr * vel[i];
    }
}

}  // namespace pitchrl::kernels::neon
