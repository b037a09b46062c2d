#include "kernels_impl.hpp"

#include <cmath>

namespace pitchrl::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = b[r] + dot(w + r * cols, x, cols);
    }
}

void gemv_t_acc(const double* w, const double* d, double* y, std::size_t rows,
                std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy(d[r], w + r * cols, y, cols);
}

void ger_acc(double* g, const double* d, const double* x, std::size_t rows,
             std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy(d[r], x, g + r * cols, cols);
}

void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, const AdamCoefficients& c) {
    for (std::size_t i = 0; i < n; ++i) {
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
        for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
        if (vel != nullptr) {
            for (std::size_t i = 0; i < n; ++i) vel[i] = g[i];
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        vel[i] = momentum * vel[i] + g[i];
        p[i] -= lr * vel[i];
    }
}

}  // namespace pitchrl::kernels::scalar
