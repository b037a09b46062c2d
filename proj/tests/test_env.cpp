#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <cmath>
#include <random>
#include <sstream>

#include "pitchrl/env.hpp"
#include "support/oracles.hpp"

using namespace pitchrl;
using namespace pitchrl::env;

TEST_CASE("reward examples") {
    CHECK(reward(0.5, 0.3, 0.0) == doctest::Approx(-0.5));
    CHECK(reward(0.5, 0.3, 1.0) == doctest::Approx(-0.3));
    CHECK(reward(0.5, 0.3, 0.25) == doctest::Approx(-0.45));
    CHECK_THROWS(reward(0.5, 0.3, 1.5));
    CHECK_THROWS(reward(0.5, 0.3, -0.1));
}

TEST_CASE("reward limits, monotonicity and range") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double d = u(rng), p = u(rng), a = u(rng), e = u(rng);
        CHECK(reward(d, p, a) == oracle::scalarized_reward(d, p, a));
        CHECK(reward(d, p, 0.0) == reward(d, e, 0.0));
        CHECK(reward(d, p, 1.0) == reward(e, p, 1.0));
        CHECK(reward(std::max(d, e), p, a) <= reward(std::min(d, e), p, a));
        CHECK(reward(d, std::max(p, e), a) <= reward(d, std::min(p, e), a));
        const double r = reward(d, p, a);
        CHECK(r <= 0.0);
        CHECK(r >= -1.0);
    }
}

TEST_CASE("reference schedule lookup") {
    CHECK(reference_at(3.0, {{0.0, 0.4}}) == 0.4);
    const ReferenceSchedule s{{0.0, 0.0}, {5.0, 0.5}};
    CHECK(reference_at(4.99, s) == 0.0);
    CHECK(reference_at(5.0, s) == 0.5);
    CHECK_THROWS(reference_at(1.0, {}));
    CHECK_THROWS(validate_schedule({{1.0, 0.0}, {0.5, 0.1}}));
    const auto eval = evaluation_schedule();
    CHECK(reference_at(1.99, eval) == 0.0);
    CHECK(reference_at(2.0, eval) == doctest::Approx(20.0 * kDegToRad));
    CHECK(reference_at(12.0, eval) == doctest::Approx(-20.0 * kDegToRad));
    CHECK(reference_at(29.0, eval) == 0.0);
}

TEST_CASE("reset") {
    EnvConfig cfg;
    PitchEnv e({}, cfg);
    const auto o = e.reset(3);
    CHECK(o == Observation{});
    cfg.ref_schedule = {{0.0, 0.3}};
    PitchEnv f({}, cfg);
    const auto o2 = f.reset(1);
    CHECK(o2.e == doctest::Approx(-o2.r_n));
    CHECK(o2.r_n == doctest::Approx(0.3 / cfg.delta_max));

    cfg.randomize_reference = true;
    PitchEnv g({}, cfg), h({}, cfg);
    CHECK(g.reset(9) == h.reset(9));
    CHECK(std::abs(g.schedule().front().target) <= cfg.random_target_max);
}

TEST_CASE("step examples") {
    EnvConfig cfg;
    PitchEnv e({}, cfg);
    e.reset(0);
    const auto r0 = e.step(0.0);
    CHECK(r0.reward == 0.0);
    CHECK(r0.p_t == 0.0);

    cfg.alpha = 1.0;
    PitchEnv s({}, cfg);
    s.reset(0);
    const auto stall = s.step(1.0);
    const double expect = std::min(1.0, 2.0 * 24.0 * 24.0 / (8.4 * cfg.p_max));
    CHECK(stall.reward == doctest::Approx(-expect));
    CHECK(stall.raw_power_w == doctest::Approx(2.0 * 24.0 * 24.0 / 8.4));

    // clamp
    PitchEnv a({}, cfg), b({}, cfg);
    a.reset(0);
    b.reset(0);
    for (int k = 0; k < 20; ++k) CHECK(a.step(7.5) == b.step(1.0));
    PitchEnv c({}, cfg), d({}, cfg);
    c.reset(0);
    d.reset(0);
    CHECK(c.step(-3.0) == d.step(-1.0));
}

TEST_CASE("step result invariants and exact episode length") {
    EnvConfig cfg;
    cfg.alpha = 0.3;
    cfg.episode_steps = 250;
    PitchEnv e({}, cfg);
    e.reset(0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> act(-1.0, 1.0);
    for (int k = 1; k <= cfg.episode_steps; ++k) {
        const auto r = e.step(act(rng));
        CHECK(r.reward == -(1.0 - cfg.alpha) * std::abs(r.delta_t) - cfg.alpha * r.p_t);
        CHECK(r.delta_t >= 0.0);
        CHECK(r.p_t >= 0.0);
        CHECK(r.done == (k == cfg.episode_steps));
        for (double v : r.obs.as_array()) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK_THROWS(e.step(0.0));
}

TEST_CASE("determinism and snapshot restore") {
    EnvConfig cfg;
    cfg.randomize_reference = true;
    PitchEnv a({}, cfg), b({}, cfg);
    a.reset(4);
    b.reset(4);
    for (int k = 0; k < 100; ++k) CHECK(a.step(std::sin(0.1 * k)) == b.step(std::sin(0.1 * k)));
    const auto snap = a.snapshot();
    std::vector<StepResult> first;
    for (int k = 0; k < 50; ++k) first.push_back(a.step(0.2));
    PitchEnv c({}, cfg);
    c.restore(snap);
    for (int k = 0; k < 50; ++k) CHECK(c.step(0.2) == first[static_cast<std::size_t>(k)]);
}

TEST_CASE("misuse") {
    PitchEnv e({}, {});
    CHECK_THROWS_AS(e.step(0.0), std::logic_error);
    e.reset(0);
    CHECK_THROWS_AS(e.step(std::nan("")), physics::NumericError);
    EnvConfig bad;
    bad.alpha = 2.0;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.episode_steps = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("trace CSV layout") {
    PitchEnv e({}, {});
    e.reset(0);
    std::vector<TraceRow> rows{trace_row(e.step(0.5)), trace_row(e.step(-0.5))};
    std::ostringstream os;
    write_trace_csv(os, rows);
    const std::string s = os.str();
    CHECK(s.rfind("t,phi_deg,r_deg,u_V,power_W,reward\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 3);
    CHECK(rows[0].u_v == 12.0);
}
