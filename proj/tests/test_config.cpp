#include <doctest.h>

#include <filesystem>
#include <stdexcept>
#include <fstream>
#include <random>
#include <sstream>

#include "pitchrl/config.hpp"

using namespace pitchrl;
using namespace pitchrl::config;

namespace {

WorkbenchConfig parse(const std::string& s) {
    std::istringstream is(s);
    return parse_config(is, "test.ini");
}

}  // namespace

TEST_CASE("defaults") {
    WorkbenchConfig c;
    c.finalize();
    CHECK(c.env.p_max == doctest::Approx(2.0 * 24.0 * 24.0 / 8.4));
    CHECK(c.sweep.alphas.size() == 7);
    CHECK(c.sweep.seeds.size() == 5);
    CHECK(c.sweep.alphas.size() * c.sweep.seeds.size() == 35);
    CHECK(c.ppo.total_steps == 500000);
    apply_fast_profile(c);
    CHECK(c.ppo.total_steps == 100000);
}

TEST_CASE("sections, derived p_max and schedule") {
    const auto c = parse(
        "[plant]\nresistance = 4.2\n"
        "[env]\nalpha = 0.25\nref_schedule_deg = 0:0, 1.5:10, 4:-5\n"
        "[ppo]\noptimizer = sgd\nhidden = 32,16\n"
        "[sweep]\nalphas = 0,1\nseeds = 3,4\nselection = best\n");
    CHECK(c.plant.motor.resistance == 4.2);
    CHECK(c.env.p_max == doctest::Approx(2.0 * 24.0 * 24.0 / 4.2));
    CHECK(c.env.alpha == 0.25);
    REQUIRE(c.env.ref_schedule.size() == 3);
    CHECK(c.env.ref_schedule[1].time == 1.5);
    CHECK(c.env.ref_schedule[2].target == doctest::Approx(-5.0 * env::kDegToRad));
    CHECK(c.ppo.optimizer == optim::OptimizerKind::Sgd);
    CHECK(c.ppo.hidden == std::vector<std::size_t>{32, 16});
    CHECK(c.sweep.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(c.sweep.selection == CheckpointSelection::BestReward);

    const auto explicit_pmax = parse("[env]\np_max = 50\n[plant]\nresistance = 4.2\n");
    CHECK(explicit_pmax.env.p_max == 50.0);
}

TEST_CASE("rejections") {
    CHECK_THROWS_AS(parse("[plant]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[weird]\nalpha = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[env]\nalpha = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[env]\nalpha = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nseeds = 1,1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nalphas = \n"), ConfigError);
    CHECK_THROWS_AS(parse("[ppo]\ntotal_steps = 15000\n"), ConfigError);
    CHECK_THROWS_AS(parse("[env]\nref_schedule_deg = 5:1, 2:0\n"), ConfigError);
    CHECK_THROWS_AS(parse("alpha = 1\n"), ConfigError);
    try {
        load_config("/nonexistent/dir/cfg.ini");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/cfg.ini") != std::string::npos);
    }
}

TEST_CASE("overrides") {
    WorkbenchConfig c;
    apply_override(c, "env.alpha=0.75");
    apply_override(c, "ppo.adam_lr = 5e-4");
    apply_override(c, "sweep.alphas=0,0.5");
    c.finalize();
    CHECK(c.env.alpha == 0.75);
    CHECK(c.ppo.adam.lr == 5e-4);
    CHECK(c.sweep.alphas == std::vector<double>{0.0, 0.5});
    CHECK_THROWS_AS(apply_override(c, "env.nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "alpha=1"), ConfigError);
}

TEST_CASE("canonical INI round-trips") {
    WorkbenchConfig c;
    apply_override(c, "env.alpha=0.1");
    apply_override(c, "plant.moment_arm=0.2");
    apply_override(c, "ppo.initial_log_std=-0.75");
    c.finalize();
    const std::string text = to_ini(c);
    const auto back = parse(text);
    CHECK(to_ini(back) == text);
    CHECK(back.env.alpha == 0.1);
    CHECK(back.env.ref_schedule.size() == c.env.ref_schedule.size());
    for (std::size_t i = 0; i < back.env.ref_schedule.size(); ++i) {
        CHECK(back.env.ref_schedule[i].target == doctest::Approx(c.env.ref_schedule[i].target).epsilon(1e-15));
    }
}

TEST_CASE("degree fields are canonical") {
    CHECK(to_ini(WorkbenchConfig{}).find("random_target_max_deg = 30\n") != std::string::npos);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.5);
    for (int i = 0; i < 200; ++i) {
        WorkbenchConfig c;
        c.env.random_target_max = u(rng);
        c.env.ref_schedule = {{0.0, 0.0}, {1.5, u(rng)}, {3.0, -u(rng)}};
        c.finalize();
        const auto back = parse(to_ini(c));
        CHECK(back.env.random_target_max == doctest::Approx(c.env.random_target_max).epsilon(1e-15));
        CHECK(back.env.ref_schedule[2].target == doctest::Approx(c.env.ref_schedule[2].target).epsilon(1e-15));
        CHECK(to_ini(parse(to_ini(back))) == to_ini(back));
    }
}

TEST_CASE("content hash is git's blob hash") {
    // git hash-object of an empty file and of "hello\n"
    CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("json views carry every field") {
    WorkbenchConfig c;
    c.finalize();
    const auto j = to_json(c.env);
    CHECK(j.at("alpha").get<double>() == 0.0);
    CHECK(j.at("ref_schedule").size() == 4);
    CHECK(to_json(c.ppo).at("optimizer") == "adam");
    CHECK(to_json(c.plant).at("resistance").get<double>() == 8.4);
}
