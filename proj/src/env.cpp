#include "pitchrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pitchrl/text.hpp"

namespace pitchrl::env {

namespace {

double clip_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

ReferenceSchedule evaluation_schedule() {
    return {{0.0, 0.0}, {2.0, 20.0 * kDegToRad}, {12.0, -20.0 * kDegToRad}, {22.0, 0.0}};
}

void validate_schedule(const ReferenceSchedule& schedule) {
    if (schedule.empty()) throw std::invalid_argument("reference schedule is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!std::isfinite(schedule[i].time) || !std::isfinite(schedule[i].target)) {
            throw std::invalid_argument("reference schedule has a non-finite entry");
        }
        if (i > 0 && schedule[i].time < schedule[i - 1].time) {
            throw std::invalid_argument("reference schedule is not sorted by time");
        }
    }
}

double reference_at(double t, const ReferenceSchedule& schedule) {
    validate_schedule(schedule);
    // before the first entry the first target holds
    double target = schedule.front().target;
    for (const auto& p : schedule) {
        if (p.time <= t) {
            target = p.target;
        } else {
            break;
        }
    }
    return target;
}

void EnvConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("env.alpha must be in [0, 1]");
    if (!(u_max > 0.0)) throw std::invalid_argument("env.u_max must be > 0");
    if (!(delta_max > 0.0)) throw std::invalid_argument("env.delta_max must be > 0");
    if (!(p_max > 0.0)) throw std::invalid_argument("env.p_max must be > 0");
    if (episode_steps < 1) throw std::invalid_argument("env.episode_steps must be >= 1");
    if (!(phi_dot_scale > 0.0)) throw std::invalid_argument("env.phi_dot_scale must be > 0");
    if (!(random_target_max >= 0.0)) {
        throw std::invalid_argument("env.random_target_max must be >= 0");
    }
    sim().validate();
    validate_schedule(ref_schedule);
}

double reward(double delta_t, double p_t, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    return -(1.0 - alpha) * std::abs(delta_t) - alpha * p_t;
}

PitchEnv::PitchEnv(physics::PlantParams plant, EnvConfig cfg)
    : plant_(plant), cfg_(std::move(cfg)), sim_(cfg_.sim()), rng_(cfg_.seed) {
    plant_.validate();
    cfg_.validate();
    omega_scale_ = 2.0 * physics::steady_state_speed(cfg_.u_max, plant_.motor);
    schedule_ = cfg_.ref_schedule;
}

Observation PitchEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    return reset();
}

Observation PitchEnv::reset() {
    state_ = {};
    step_index_ = 0;
    needs_reset_ = false;
    if (cfg_.randomize_reference) {
        std::uniform_real_distribution<double> target(-cfg_.random_target_max,
                                                      cfg_.random_target_max);
        schedule_ = {{0.0, target(rng_)}};
    } else {
        schedule_ = cfg_.ref_schedule;
    }
    return observe();
}

Observation PitchEnv::observe() const {
    const double r = reference_at(time(), schedule_);
    return {clip_unit((state_.phi - r) / cfg_.delta_max),
            clip_unit(state_.phi_dot / cfg_.phi_dot_scale),
            clip_unit((state_.omega1 - state_.omega2) / omega_scale_),
            clip_unit(r / cfg_.delta_max)};
}

StepResult PitchEnv::step(double action) {
    if (needs_reset_) throw std::logic_error("PitchEnv::step called before reset");
    if (!std::isfinite(action)) throw physics::NumericError("non-finite action");
    const double volts = std::clamp(action, -1.0, 1.0) * cfg_.u_max;
    const double r = reference_at(time(), schedule_);
    const double power_w = physics::electrical_power(volts, state_, plant_.motor);

    state_ = physics::step(state_, volts, sim_, plant_);
    ++step_index_;

    StepResult out;
    const double deviation = std::abs(state_.phi - r);
    out.delta_t = std::clamp(deviation / cfg_.delta_max, 0.0, 1.0);
    out.p_t = std::clamp(power_w / cfg_.p_max, 0.0, 1.0);
    out.reward = reward(out.delta_t, out.p_t, cfg_.alpha);
    out.raw_deviation_deg = deviation * kRadToDeg;
    out.raw_power_w = power_w;
    out.done = step_index_ >= cfg_.episode_steps;
    out.time = time();
    out.phi = state_.phi;
    out.reference = r;
    out.volts = volts;
    out.obs = observe();
    needs_reset_ = out.done;
    return out;
}

EnvSnapshot PitchEnv::snapshot() const {
    std::ostringstream rng;
    rng << rng_;
    return {state_, step_index_, needs_reset_, schedule_, rng.str()};
}

void PitchEnv::restore(const EnvSnapshot& snap) {
    validate_schedule(snap.schedule);
    state_ = snap.state;
    step_index_ = snap.step_index;
    needs_reset_ = snap.needs_reset;
    schedule_ = snap.schedule;
    std::istringstream rng(snap.rng_state);
    rng >> rng_;
    if (!rng) throw std::invalid_argument("corrupt environment generator state");
}

TraceRow trace_row(const StepResult& r) {
    return {r.time, r.phi * kRadToDeg, r.reference * kRadToDeg, r.volts, r.raw_power_w, r.reward};
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    using text::format_double;
    os << "t,phi_deg,r_deg,u_V,power_W,reward\n";
    for (const auto& row : rows) {
        os << format_double(row.t) << ',' << format_double(row.phi_deg) << ','
           << format_double(row.r_deg) << ',' << format_double(row.u_v) << ','
           << format_double(row.power_w) << ',' << format_double(row.reward) << '\n';
    }
}

}  // namespace pitchrl::env
