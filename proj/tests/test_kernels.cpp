#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "pitchrl/kernels.hpp"

using namespace pitchrl::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

std::vector<Backend> simd_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Avx2, Backend::Neon}) {
        if (backend_available(b)) out.push_back(b);
    }
    return out;
}

}  // namespace

TEST_CASE("scalar kernels against hand values") {
    const auto& k = scalar_table();
    const double a[] = {1, 2, 3}, b[] = {4, 5, 6};
    CHECK(k.dot(a, b, 3) == 32.0);
    double y[] = {1, 1, 1};
    k.axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    const double w[] = {1, 2, 3, 4, 5, 6};  // 2 x 3
    const double bias[] = {0.5, -0.5};
    double out[2];
    k.gemv(w, bias, a, out, 2, 3);
    CHECK(out[0] == 14.5);
    CHECK(out[1] == 31.5);
    double acc[3] = {0, 0, 0};
    const double d[] = {1, -1};
    k.gemv_t_acc(w, d, acc, 2, 3);
    CHECK(acc[0] == -3.0);
    CHECK(acc[2] == -3.0);
    double g[6] = {};
    k.ger_acc(g, d, a, 2, 3);
    CHECK(g[4] == -2.0);
}

TEST_CASE("scalar table is always available and names parse") {
    CHECK(backend_available(Backend::Scalar));
    CHECK(parse_backend("scalar") == Backend::Scalar);
    CHECK(parse_backend("avx2") == Backend::Avx2);
    CHECK_THROWS_AS(parse_backend("sse9"), std::invalid_argument);
    CHECK(backend_name(Backend::Neon) == "neon");
}

TEST_CASE("SIMD backends match the scalar reference") {
    const auto backends = simd_backends();
    if (backends.empty()) MESSAGE("no SIMD backend on this machine; equivalence cases skipped");
    std::mt19937_64 rng(11);
    const auto& ref = scalar_table();
    for (Backend bk : backends) {
        const auto& k = table_for(bk);
        CAPTURE(k.name);
        for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 64u, 65u, 131u}) {
            CAPTURE(n);
            const auto x = random_vec(rng, n), y0 = random_vec(rng, n);
            CHECK(close(k.dot(x.data(), y0.data(), n), ref.dot(x.data(), y0.data(), n)));

            // elementwise kernels are bit-identical
            auto ya = y0, yb = y0;
            k.axpy(0.37, x.data(), ya.data(), n);
            ref.axpy(0.37, x.data(), yb.data(), n);
            CHECK(ya == yb);

            auto pa = random_vec(rng, n), ma = random_vec(rng, n), va = random_vec(rng, n);
            for (auto& v : va) v = std::abs(v);
            auto pb = pa, mb = ma, vb = va;
            const auto g = random_vec(rng, n);
            const AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
            k.adam_update(pa.data(), ma.data(), va.data(), g.data(), n, c);
            ref.adam_update(pb.data(), mb.data(), vb.data(), g.data(), n, c);
            CHECK(pa == pb);
            CHECK(ma == mb);
            CHECK(va == vb);

            auto sa = pb, sb = pb, vela = y0, velb = y0;
            k.sgd_update(sa.data(), vela.data(), g.data(), n, 0.01, 0.9);
            ref.sgd_update(sb.data(), velb.data(), g.data(), n, 0.01, 0.9);
            CHECK(sa == sb);
            CHECK(vela == velb);
        }
        for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {4, 4}, {5, 3}, {64, 4}, {64, 64}, {7, 65}}) {
            CAPTURE(rows);
            CAPTURE(cols);
            const auto w = random_vec(rng, rows * cols), b = random_vec(rng, rows), x = random_vec(rng, cols);
            const auto d = random_vec(rng, rows);
            std::vector<double> ya(rows), yb(rows);
            k.gemv(w.data(), b.data(), x.data(), ya.data(), rows, cols);
            ref.gemv(w.data(), b.data(), x.data(), yb.data(), rows, cols);
            for (std::size_t i = 0; i < rows; ++i) CHECK(close(ya[i], yb[i]));

            auto ta = x, tb = x;
            k.gemv_t_acc(w.data(), d.data(), ta.data(), rows, cols);
            ref.gemv_t_acc(w.data(), d.data(), tb.data(), rows, cols);
            for (std::size_t i = 0; i < cols; ++i) CHECK(close(ta[i], tb[i]));

            auto ga = w, gb = w;
            k.ger_acc(ga.data(), d.data(), x.data(), rows, cols);
            ref.ger_acc(gb.data(), d.data(), x.data(), rows, cols);
            CHECK(ga == gb);
        }
    }
}

TEST_CASE("active backend can be switched") {
    const Backend before = active_backend();
    set_active_backend(Backend::Scalar);
    CHECK(active_backend() == Backend::Scalar);
    std::vector<double> a{1, 2}, b{3, 4};
    CHECK(dot(a, b) == 11.0);
    set_active_backend(before);
    if (!backend_available(Backend::Neon)) CHECK_THROWS(set_active_backend(Backend::Neon));
}
