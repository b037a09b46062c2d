#pragma once

// Episodic MDP around the pitch plant: normalized observations, voltage
// actions in [-1, 1] scaled by u_max, a reference-pitch schedule and the
// scalarized reward -(1 - alpha)|delta| - alpha * p.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "pitchrl/physics.hpp"

namespace pitchrl::env {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kDegToRad = kPi / 180.0;

struct RefPoint {
    double time = 0.0;    // s
    double target = 0.0;  // rad
    friend bool operator==(const RefPoint&, const RefPoint&) = default;
};
using ReferenceSchedule = std::vector<RefPoint>;

/// 0 -> +20 deg at 2 s -> -20 deg at 12 s -> 0 at 22 s.
ReferenceSchedule evaluation_schedule();

/// Piecewise-constant lookup: target of the last entry with time <= t.
/// Throws std::invalid_argument for an empty or unsorted schedule.
double reference_at(double t, const ReferenceSchedule& schedule);
void validate_schedule(const ReferenceSchedule& schedule);

struct EnvConfig {
    double alpha = 0.0;
    double u_max = 24.0;                 // V
    double delta_max = kPi / 2.0;        // rad
    double p_max = 2.0 * 24.0 * 24.0 / 8.4; // W, both motors at stall
    int episode_steps = 3000;
    double dt = 0.01;                    // s
    int substeps = 10;
    ReferenceSchedule ref_schedule = evaluation_schedule();
    // When set, every reset draws a single step target uniformly from
    // [-random_target_max, +random_target_max] instead of ref_schedule.
    bool randomize_reference = false;
    double random_target_max = 30.0 * kDegToRad;  // rad
    double phi_dot_scale = 5.0;          // rad/s
    std::uint64_t seed = 0;

    void validate() const;
    physics::SimConfig sim() const { return {dt, substeps}; }
};

inline constexpr std::size_t kObservationDim = 4;

// Every component is clipped to [-1, 1].
struct Observation {
    double e = 0.0;          // (phi - r) / delta_max
    double phi_dot_n = 0.0;  // phi_dot / phi_dot_scale
    double omega_n = 0.0;    // (omega1 - omega2) / (2 omega_ss(u_max))
    double r_n = 0.0;        // r / delta_max

    std::array<double, kObservationDim> as_array() const { return {e, phi_dot_n, omega_n, r_n}; }
    friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    double delta_t = 0.0;  // normalized deviation, [0, 1]
    double p_t = 0.0;      // normalized power, [0, 1]
    bool done = false;
    double raw_deviation_deg = 0.0;
    double raw_power_w = 0.0;
    // trace extras
    double time = 0.0;     // s, end of the control period
    double phi = 0.0;      // rad, end of the control period
    double reference = 0.0;
    double volts = 0.0;
    friend bool operator==(const StepResult&, const StepResult&) = default;
};

/// -(1 - alpha)|delta_t| - alpha p_t. Throws for alpha outside [0, 1].
double reward(double delta_t, double p_t, double alpha);

// Everything needed to continue an episode bit-exactly.
struct EnvSnapshot {
    physics::PlantState state;
    int step_index = 0;
    bool needs_reset = true;
    ReferenceSchedule schedule;
    std::string rng_state;
};

class PitchEnv {
 public:
    PitchEnv(physics::PlantParams plant, EnvConfig cfg);

    /// Rest state, reseeded generator, fresh reference.
    Observation reset(std::uint64_t seed);
    /// Rest state, next reference from the running generator.
    Observation reset();

    /// Clamp to [-1, 1], apply u = action * u_max for one control period.
    /// Power is drawn at the start of the period; deviation is measured at
    /// its end against the reference active during the period.
    StepResult step(double action);

    Observation observe() const;
    double time() const { return step_index_ * cfg_.dt; }
    int step_index() const { return step_index_; }
    bool needs_reset() const { return needs_reset_; }
    const physics::PlantState& state() const { return state_; }
    const ReferenceSchedule& schedule() const { return schedule_; }
    const EnvConfig& config() const { return cfg_; }
    const physics::PlantParams& plant() const { return plant_; }

    EnvSnapshot snapshot() const;
    void restore(const EnvSnapshot& snap);

 private:
    physics::PlantParams plant_;
    EnvConfig cfg_;
    physics::SimConfig sim_;
    double omega_scale_;
    physics::PlantState state_;
    ReferenceSchedule schedule_;
    int step_index_ = 0;
    bool needs_reset_ = true;
    std::mt19937_64 rng_;
};

struct TraceRow {
    double t = 0.0;
    double phi_deg = 0.0;
    double r_deg = 0.0;
    double u_v = 0.0;
    double power_w = 0.0;
    double reward = 0.0;
};

TraceRow trace_row(const StepResult& r);
/// Header t,phi_deg,r_deg,u_V,power_W,reward.
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

}  // namespace pitchrl::env
