#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "pitchrl/policy.hpp"
#include "support/oracles.hpp"

using namespace pitchrl::policy;

namespace {

Architecture small_arch() {
    Architecture a;
    a.layers = {4, 6, 5};
    return a;
}

PolicyParams random_params(const Architecture& a, std::mt19937_64& rng, double scale = 0.5) {
    PolicyParams p(a);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : p.values()) v = n(rng);
    p.clamp_log_std();
    return p;
}

std::vector<double> as_vec(const PolicyParams& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace

TEST_CASE("parameter layout") {
    Architecture a = small_arch();
    CHECK(a.param_count() == (4 * 6 + 6) + (6 * 5 + 5) + (5 + 1) + (5 + 1) + 1);
    PolicyParams p(a);
    CHECK(p.size() == a.param_count());
    CHECK(p.log_std_offset() == p.size() - 1);
    CHECK(p.value_bias_offset() == p.size() - 2);
    Architecture bad;
    bad.layers = {4};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("zero weights give zero mean and value") {
    PolicyParams p(Architecture{});
    const std::vector<double> obs{0.3, -0.2, 0.9, 0.1};
    const auto out = forward(p, obs);
    CHECK(out.pre_squash_mean[0] == 0.0);
    CHECK(out.mean_action[0] == 0.0);
    CHECK(out.value == 0.0);
    CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("dead input column") {
    std::mt19937_64 rng(1);
    auto p = random_params(small_arch(), rng);
    auto v = p.values();
    for (std::size_t o = 0; o < 6; ++o) v[o * 4 + 2] = 0.0;
    std::vector<double> a{0.1, 0.2, -0.9, 0.4}, b = a;
    b[2] = 0.7;
    const auto oa = forward(p, a), ob = forward(p, b);
    CHECK(oa.pre_squash_mean == ob.pre_squash_mean);
    CHECK(oa.value == ob.value);
}

TEST_CASE("forward agrees with the reference network") {
    std::mt19937_64 rng(2);
    const auto a = small_arch();
    const oracle::ReferenceNet ref{a.layers, 1};
    for (int t = 0; t < 20; ++t) {
        auto p = random_params(a, rng);
        std::vector<double> obs{0.1 * t, -0.3, 0.5, 0.02 * t};
        const auto out = forward(p, obs);
        const auto r = ref.forward(as_vec(p), obs.data());
        CHECK(out.pre_squash_mean[0] == doctest::Approx(r.mean[0]).epsilon(1e-12));
        CHECK(out.value == doctest::Approx(r.value).epsilon(1e-12));
    }
}

TEST_CASE("log-density peak and sigma scaling") {
    PolicyParams p(Architecture{});
    const std::vector<double> obs(4, 0.0);
    p.log_std()[0] = 0.0;
    const std::vector<double> a0{0.0};
    CHECK(log_prob(p, obs, a0) == doctest::Approx(-0.5 * std::log(2.0 * oracle::kPi)));
    const double peak = log_prob(p, obs, a0);
    p.log_std()[0] = std::log(2.0);
    CHECK(peak - log_prob(p, obs, a0) == doctest::Approx(std::log(2.0)));
    // off-centre action carries the Jacobian term
    p.log_std()[0] = 0.0;
    const double a = 0.6, z = std::atanh(a);
    CHECK(log_prob(p, obs, std::vector<double>{a}) ==
          doctest::Approx(-0.5 * z * z - 0.5 * std::log(2.0 * oracle::kPi) - std::log(1.0 - a * a)));
    CHECK(std::isinf(log_prob(p, obs, std::vector<double>{1.0})));
}

TEST_CASE("squash log-det is stable in the tails") {
    for (double z : {-40.0, -5.0, 0.0, 0.3, 5.0, 40.0}) {
        const double expect = 2.0 * (std::log(2.0) - std::abs(z) - std::log1p(std::exp(-2.0 * std::abs(z))));
        CHECK(squash_log_det(std::vector<double>{z}) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::isfinite(squash_log_det(std::vector<double>{z})));
    }
}

TEST_CASE("density integrates to one") {
    std::mt19937_64 rng(4);
    for (double mu_shift : {0.0, 0.4, -0.8}) {
        for (double ls : {-0.7, 0.0}) {
            auto p = random_params(small_arch(), rng, 0.2);
            p.log_std()[0] = ls;
            p.values()[p.mean_bias_offset()] += mu_shift;
            const std::vector<double> obs{0.2, 0.1, -0.3, 0.0};
            const double lim = 1.0 - 1e-12;
            const double mass = oracle::simpson(
                [&](double a) { return std::exp(log_prob(p, obs, std::vector<double>{a})); }, -lim, lim, 400000);
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
        }
    }
}

TEST_CASE("sampling") {
    std::mt19937_64 rng(8);
    auto p = random_params(small_arch(), rng);
    const std::vector<double> obs{0.5, -0.5, 0.1, 0.0};
    std::mt19937_64 r1(3), r2(3);
    const auto s1 = sample(p, obs, r1), s2 = sample(p, obs, r2);
    CHECK(s1.action == s2.action);
    CHECK(s1.log_prob == doctest::Approx(log_prob_pre_squash(p, obs, s1.pre_squash)));

    p.log_std()[0] = kLogStdMin;
    const auto tight = sample(p, obs, r1);
    CHECK(tight.action[0] == doctest::Approx(std::tanh(forward(p, obs).pre_squash_mean[0])).epsilon(0.02));

    p.log_std()[0] = 0.3;
    const double mu = forward(p, obs).pre_squash_mean[0];
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto s = sample(p, obs, r1);
        sum += s.pre_squash[0];
        CHECK(std::abs(s.action[0]) < 1.0);
    }
    CHECK(std::abs(sum / n - mu) <= 3.0 * std::exp(0.3) / std::sqrt(static_cast<double>(n)));

    p.log_std()[0] = kLogStdMax;
    p.values()[p.mean_bias_offset()] = 30.0;
    for (int i = 0; i < 1000; ++i) CHECK(std::abs(sample(p, obs, r1).action[0]) <= 1.0);
}

namespace {

struct RandomBatch {
    std::vector<double> obs, z, old_lp, adv, ret;
    BatchView view() const { return {obs, z, old_lp, adv, ret}; }
};

RandomBatch make_batch(const PolicyParams& p, std::mt19937_64& rng, std::size_t n, double clip) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ratio(0.5, 1.6);
    RandomBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 4; ++d) b.obs.push_back(g(rng));
        b.z.push_back(g(rng));
        b.adv.push_back(g(rng));
        b.ret.push_back(g(rng));
        double r = ratio(rng);
        while (std::abs(r - (1.0 - clip)) < 1e-3 || std::abs(r - (1.0 + clip)) < 1e-3) r = ratio(rng);
        const std::span<const double> o(b.obs.data() + i * 4, 4);
        b.old_lp.push_back(log_prob_pre_squash(p, o, std::span<const double>(&b.z[i], 1)) - std::log(r));
    }
    return b;
}

}  // namespace

TEST_CASE("loss matches the reference loss") {
    std::mt19937_64 rng(21);
    const auto a = small_arch();
    const oracle::ReferenceNet ref{a.layers, 1};
    for (int t = 0; t < 10; ++t) {
        const auto p = random_params(a, rng);
        const auto b = make_batch(p, rng, 9, 0.2);
        const LossSpec spec{0.2, 0.5, 0.01};
        const double expect = ref.loss(as_vec(p), b.obs, b.z, b.old_lp, b.adv, b.ret, 0.2, 0.5, 0.01);
        CHECK(evaluate_loss(p, b.view(), spec).loss == doctest::Approx(expect).epsilon(1e-11));
    }
}

TEST_CASE("backward matches central differences of the reference loss") {
    std::mt19937_64 rng(33);
    const auto a = small_arch();
    const oracle::ReferenceNet ref{a.layers, 1};
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const auto p = random_params(a, rng);
        const auto b = make_batch(p, rng, 8, 0.2);
        const LossSpec spec{0.2, 0.5, 0.01};
        Gradients g(p);
        backward(p, b.view(), spec, g);
        auto theta = as_vec(p);
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double x0 = theta[k];
            const double fd = oracle::central_difference(
                [&](double x) {
                    theta[k] = x;
                    return ref.loss(theta, b.obs, b.z, b.old_lp, b.adv, b.ret, 0.2, 0.5, 0.01);
                },
                x0, 1e-5);
            theta[k] = x0;
            const double err = std::abs(fd - g.values[k]);
            CHECK(err <= std::max(1e-6, 1e-4 * std::abs(fd)));
            worst = std::max(worst, err / std::max(1e-6, std::abs(fd)));
        }
    }
    MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("zero advantages remove the policy gradient") {
    std::mt19937_64 rng(5);
    const auto a = small_arch();
    const auto p = random_params(a, rng);
    auto b = make_batch(p, rng, 6, 0.2);
    std::fill(b.adv.begin(), b.adv.end(), 0.0);
    Gradients g(p);
    const auto rep = backward(p, b.view(), {0.2, 0.0, 0.0}, g);
    CHECK(rep.policy_loss == 0.0);
    for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("value gradient on one sample follows the chain rule") {
    std::mt19937_64 rng(6);
    const auto a = small_arch();
    const auto p = random_params(a, rng);
    auto b = make_batch(p, rng, 1, 0.2);
    b.adv[0] = 0.0;
    Gradients g(p);
    backward(p, b.view(), {0.2, 1.0, 0.0}, g);
    const double v = forward(p, std::span<const double>(b.obs.data(), 4)).value;
    // dv/d(value bias) = 1
    CHECK(g.values[p.value_bias_offset()] == doctest::Approx(2.0 * (v - b.ret[0])));
}

TEST_CASE("gradient helpers") {
    Gradients a, b;
    a.values = {3.0, 4.0};
    b.values = {1.0, 1.0};
    CHECK(a.norm() == 5.0);
    a += b;
    CHECK(a.values == std::vector<double>{4.0, 5.0});
    a.scale(0.5);
    CHECK(a.values == std::vector<double>{2.0, 2.5});
}

TEST_CASE("backward rejects non-finite losses") {
    std::mt19937_64 rng(9);
    const auto p = random_params(small_arch(), rng);
    auto b = make_batch(p, rng, 3, 0.2);
    b.ret[1] = std::nan("");
    Gradients g(p);
    CHECK_THROWS_AS(backward(p, b.view(), {}, g), std::domain_error);
}

TEST_CASE("init is seeded and respects the requested log std") {
    std::mt19937_64 r1(12), r2(12);
    const auto a = init_params(Architecture{}, r1, -1.0);
    const auto b = init_params(Architecture{}, r2, -1.0);
    CHECK(a == b);
    CHECK(a.log_std()[0] == -1.0);
    CHECK(a.finite());
}
