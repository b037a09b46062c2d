#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <random>
#include <sstream>

#include "pitchrl/ppo.hpp"
#include "support/oracles.hpp"

using namespace pitchrl;
using namespace pitchrl::ppo;

namespace {

PpoConfig tiny_config() {
    PpoConfig c;
    c.total_steps = 3000;
    c.eval_every = 1000;
    c.rollout_len = 500;
    c.minibatch_size = 125;
    c.epochs_per_update = 2;
    c.hidden = {16, 16};
    return c;
}

env::EnvConfig short_eval() {
    env::EnvConfig e;
    e.episode_steps = 400;
    e.ref_schedule = {{0.0, 0.0}, {1.0, 0.2}};
    return e;
}

policy::PolicyParams random_policy(std::uint64_t seed, std::vector<std::size_t> hidden = {8, 8}) {
    std::mt19937_64 rng(seed);
    policy::Architecture a;
    a.layers = {4};
    a.layers.insert(a.layers.end(), hidden.begin(), hidden.end());
    return policy::init_params(a, rng, -1.0);
}

RolloutBuffer synthetic_buffer(std::mt19937_64& rng, std::size_t n, std::vector<std::size_t> done_at) {
    std::normal_distribution<double> g(0.0, 1.0);
    RolloutBuffer b;
    for (std::size_t i = 0; i < n; ++i) {
        b.rewards.push_back(-std::abs(g(rng)));
        b.values.push_back(g(rng));
        b.dones.push_back(0);
    }
    for (auto d : done_at) b.dones[d] = 1;
    return b;
}

std::vector<int> as_int(const std::vector<std::uint8_t>& d) { return {d.begin(), d.end()}; }

}  // namespace

TEST_CASE("rollout collection") {
    env::PitchEnv e({}, short_eval());
    e.reset(0);
    const auto p = random_policy(1);
    std::mt19937_64 r1(5), r2(5);
    const auto one = collect_rollout(e, p, r1, 1);
    CHECK(one.size() == 1);
    CHECK(one.obs.size() == 4);

    env::PitchEnv a({}, short_eval()), b({}, short_eval());
    a.reset(0);
    b.reset(0);
    std::mt19937_64 s1(9), s2(9);
    const auto ba = collect_rollout(a, p, s1, 900), bb = collect_rollout(b, p, s2, 900);
    CHECK(ba.rewards == bb.rewards);
    CHECK(ba.raw_actions == bb.raw_actions);
    int dones = 0;
    for (std::size_t i = 0; i < ba.size(); ++i) {
        CHECK(ba.rewards[i] <= 0.0);
        CHECK(ba.rewards[i] >= -1.0);
        dones += ba.dones[i];
    }
    CHECK(dones == 2);  // episodes of 400 steps
}

TEST_CASE("GAE special cases against brute force") {
    std::mt19937_64 rng(3);
    const double gamma = 0.97;
    SUBCASE("lambda = 0 is one-step TD") {
        auto b = synthetic_buffer(rng, 30, {9, 20});
        const double boot = 0.7;
        compute_gae(b, gamma, 0.0, boot);
        for (std::size_t t = 0; t < 30; ++t) {
            const double next = t + 1 < 30 ? b.values[t + 1] : boot;
            const double expect = b.rewards[t] + gamma * next * (1 - b.dones[t]) - b.values[t];
            CHECK(b.advantages[t] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    SUBCASE("gamma = 0") {
        auto b = synthetic_buffer(rng, 12, {4});
        compute_gae(b, 0.0, 0.8, 1.0);
        for (std::size_t t = 0; t < 12; ++t) {
            CHECK(b.advantages[t] == doctest::Approx(b.rewards[t] - b.values[t]).epsilon(1e-12));
        }
    }
    SUBCASE("lambda = 1 on one episode equals discounted return minus value") {
        auto b = synthetic_buffer(rng, 40, {});
        const double boot = -2.0;
        compute_gae(b, gamma, 1.0, boot);
        for (std::size_t t = 0; t < 40; ++t) {
            const double ret = oracle::discounted_return(b.rewards, t, boot, gamma);
            CHECK(b.advantages[t] == doctest::Approx(ret - b.values[t]).epsilon(1e-10));
            CHECK(b.returns[t] == doctest::Approx(ret).epsilon(1e-10));
        }
    }
    SUBCASE("general lambda with episode boundaries") {
        auto b = synthetic_buffer(rng, 50, {7, 8, 31, 49});
        compute_gae(b, gamma, 0.9, 123.0);
        const auto expect = oracle::gae(b.rewards, b.values, as_int(b.dones), 123.0, gamma, 0.9);
        for (std::size_t t = 0; t < 50; ++t) CHECK(b.advantages[t] == doctest::Approx(expect[t]).epsilon(1e-10));
    }
}

TEST_CASE("advantage normalization") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(3.0, 7.0);
    std::vector<double> a(500);
    for (auto& x : a) x = g(rng);
    const auto n = normalized_advantages(a);
    double mean = 0.0, var = 0.0;
    for (double x : n) mean += x;
    mean /= n.size();
    for (double x : n) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var / n.size()) - 1.0) < 1e-6);
    CHECK(normalized_advantages({4.2}) == std::vector<double>{0.0});
    const auto flat = normalized_advantages({2.0, 2.0, 2.0});
    for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("first minibatch is on-policy") {
    env::PitchEnv e({}, short_eval());
    e.reset(0);
    auto p = random_policy(2);
    std::mt19937_64 rng(1);
    auto buf = collect_rollout(e, p, rng, 500);
    compute_gae(buf, 0.99, 0.95, 0.0);
    auto cfg = tiny_config();
    cfg.hidden = {8, 8};
    auto opt = optim::Optimizer::adam(cfg.adam, p.size());
    const auto stats = ppo_update(p, buf, cfg, opt, rng);
    CHECK(stats.initial_ratio_deviation < 1e-6);
    CHECK(stats.minibatches == cfg.epochs_per_update * 4);
}

TEST_CASE("zero advantages move only the value head") {
    env::PitchEnv e({}, short_eval());
    e.reset(0);
    auto p = random_policy(3);
    std::mt19937_64 rng(2);
    auto buf = collect_rollout(e, p, rng, 250);
    buf.advantages.assign(buf.size(), 0.0);
    buf.returns = buf.values;
    for (auto& r : buf.returns) r += 1.0;
    auto cfg = tiny_config();
    cfg.minibatch_size = 250;
    cfg.rollout_len = 250;
    cfg.epochs_per_update = 1;
    const auto before = p;
    auto opt = optim::Optimizer::sgd({0.01, 0.0}, p.size());
    const auto stats = ppo_update(p, buf, cfg, opt, rng);
    CHECK(stats.policy_loss == 0.0);
    const auto ls = p.log_std_offset();
    CHECK(p.values()[ls] == before.values()[ls]);
    for (std::size_t k = p.mean_weight_offset(); k < p.value_weight_offset(); ++k) {
        CHECK(p.values()[k] == before.values()[k]);
    }
    CHECK(p.values()[p.value_bias_offset()] != before.values()[p.value_bias_offset()]);
}

TEST_CASE("clipped ratio has zero policy gradient") {
    const auto p = random_policy(4, {5, 5});
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 6;
    std::vector<double> obs, z, old_lp, adv, ret;
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 4; ++d) obs.push_back(g(rng));
        z.push_back(g(rng));
        adv.push_back(0.5 + std::abs(g(rng)));
        ret.push_back(0.0);
        const std::span<const double> o(obs.data() + i * 4, 4);
        old_lp.push_back(policy::log_prob_pre_squash(p, o, std::span<const double>(&z[i], 1)) - std::log(1.5));
    }
    const policy::BatchView b{obs, z, old_lp, adv, ret};
    const policy::LossSpec spec{0.2, 0.0, 0.0};
    policy::Gradients grad(p);
    const auto rep = policy::backward(p, b, spec, grad);
    double mean_adv = 0.0;
    for (double a : adv) mean_adv += a;
    mean_adv /= n;
    CHECK(rep.policy_loss == doctest::Approx(-1.2 * mean_adv).epsilon(1e-12));
    CHECK(rep.clip_fraction == 1.0);
    for (double v : grad.values) CHECK(v == 0.0);
    auto q = p;
    for (std::size_t k = 0; k < q.size(); k += 7) {
        const double x0 = q.values()[k];
        const double fd = oracle::central_difference(
            [&](double x) {
                q.values()[k] = x;
                return policy::evaluate_loss(q, b, spec).loss;
            },
            x0, 1e-6);
        q.values()[k] = x0;
        CHECK(std::abs(fd) < 1e-8);
    }
}

TEST_CASE("checkpoint count") {
    PpoConfig c;
    c.total_steps = 20000;
    c.eval_every = 10000;
    CHECK(c.checkpoint_count() == 2);
    c.total_steps = 25000;
    CHECK_THROWS(c.validate());
    const auto cps = train({}, short_eval(), tiny_config(), 1);
    CHECK(cps.size() == 3);
    CHECK(cps.back().step == 3000);
}

TEST_CASE("training is deterministic and resumes bit-exactly") {
    const auto cfg = tiny_config();
    const auto a = train({}, short_eval(), cfg, 42);
    const auto b = train({}, short_eval(), cfg, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].params == b[i].params);
        CHECK(a[i].eval.deviation_deg == b[i].eval.deviation_deg);
        CHECK(a[i].eval.power_w == b[i].eval.power_w);
    }

    const auto path = std::filesystem::temp_directory_path() / "pitchrl_test_ckpt.json";
    save_checkpoint(a[0], path);
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(loaded.params == a[0].params);
    CHECK(loaded.optimizer == a[0].optimizer);
    CHECK(loaded.rng_state == a[0].rng_state);
    auto t = Trainer::resume({}, short_eval(), cfg, loaded);
    for (std::size_t i = 1; i < a.size(); ++i) {
        const auto c = t.next_checkpoint();
        CHECK(c.step == a[i].step);
        CHECK(c.params == a[i].params);
        CHECK(c.optimizer == a[i].optimizer);
        CHECK(c.eval.mean_reward == a[i].eval.mean_reward);
    }
    CHECK(t.finished());
    CHECK_THROWS_AS(t.next_checkpoint(), std::logic_error);
}

TEST_CASE("training log format") {
    const auto cps = train({}, short_eval(), tiny_config(), 3);
    std::ostringstream os;
    write_training_log_header(os);
    for (const auto& c : cps) write_training_log_row(os, c);
    const std::string s = os.str();
    CHECK(s.rfind("step,eval_deviation_deg,eval_power_w,eval_reward,", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}

TEST_CASE("evaluation is deterministic and uses the mean action") {
    const auto p = random_policy(8);
    std::vector<env::TraceRow> trace;
    const auto m1 = evaluate_policy(p, {}, short_eval(), &trace);
    const auto m2 = evaluate_policy(p, {}, short_eval());
    CHECK(m1.deviation_deg == m2.deviation_deg);
    CHECK(m1.steps == 400);
    CHECK(trace.size() == 400);
    double dev = 0.0;
    for (const auto& r : trace) dev += std::abs(r.phi_deg - r.r_deg);
    CHECK(m1.deviation_deg == doctest::Approx(dev / trace.size()).epsilon(1e-9));
}

TEST_CASE("alpha = 0 training improves tracking on a majority of seeds") {
    PpoConfig cfg;
    cfg.total_steps = 100000;
    int improved = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const double untrained =
            evaluate_policy(Trainer({}, env::EnvConfig{}, cfg, seed).params(), {}, env::EnvConfig{}).deviation_deg;
        const auto cps = train({}, env::EnvConfig{}, cfg, seed);
        MESSAGE("seed " << seed << ": untrained " << untrained << " deg, final " << cps.back().eval.deviation_deg
                        << " deg");
        if (cps.back().eval.deviation_deg < untrained) ++improved;
    }
    CHECK(improved >= 2);
}
