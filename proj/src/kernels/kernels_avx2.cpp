// Compiled with -mavx2 -mfma -ffp-contract=off. Only reached through the
// dispatch table after a CPUID check.
#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace pitchrl::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols) {
    std::size_t r = 0;
    // four rows at a time share each load of x
    for (; r + 4 <= rows; r += 4) {
        const double* w0 = w + r * cols;
        const double* w1 = w0 + cols;
        const double* w2 = w1 + cols;
        const double* w3 = w2 + cols;
        __m256d a0 = _mm256_setzero_pd();
        __m256d a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd();
        __m256d a3 = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d xv = _mm256_loadu_pd(x + c);
            a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), xv, a0);
            a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), xv, a1);
            a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), xv, a2);
            a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), xv, a3);
        }
        double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
        for (; c < cols; ++c) {
            s0 += w0[c] * x[c];
            s1 += w1[c] * x[c];
            s2 += w2[c] * x[c];
            s3 += w3[c] * x[c];
        }
        y[r] = b[r] + s0;
        y[r + 1] = b[r + 1] + s1;
        y[r + 2] = b[r + 2] + s2;
        y[r + 3] = b[r + 3] + s3;
    }
    for (; r < rows; ++r) y[r] = b[r] + dot(w + r * cols, x, cols);
}

void gemv_t_acc(const double* w, const double* d, double* y, std::size_t rows,
                std::size_t cols) {
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
        __m256d acc = _mm256_loadu_pd(y + c);
        for (std::size_t r = 0; r < rows; ++r) {
            acc = _mm256_fmadd_pd(_mm256_set1_pd(d[r]), _mm256_loadu_pd(w + r * cols + c), acc);
        }
        _mm256_storeu_pd(y + c, acc);
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
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr);
    const __m256d eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                         _mm256_mul_pd(omb1, gv));
        const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(omb2, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d m_hat = _mm256_div_pd(mv, bc1);
        const __m256d v_hat = _mm256_div_pd(vv, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                           _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
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
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    if (vel == nullptr || momentum == 0.0) {
        for (; i + 4 <= n; i += 4) {
            const __m256d gv = _mm256_loadu_pd(g + i);
            _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_mul_pd(vlr, gv)));
            if (vel != nullptr) _mm256_storeu_pd(vel + i, gv);
        }
        for (; i < n; ++i) {
            p[i] -= lr * g[i];
            if (vel != nullptr) vel[i] = g[i];
        }
        return;
    }
    const __m256d mu = _mm256_set1_pd(momentum);
    for (; i + 4 <= n; i += 4) {
        const __m256d vv = _mm256_add_pd(_mm256_mul_pd(mu, _mm256_loadu_pd(vel + i)),
                                         _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(vel + i, vv);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_mul_pd(vlr, vv)));
    }
    for (; i < n; ++i) {
        vel[i] = momentum * vel[i] + g[i];
        p[i] -= lr * vel[i];
    }
}

}  // namespace pitchrl::kernels::avx2
