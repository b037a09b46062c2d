#include "pitchrl/physics.hpp"

#include <cmath>
#include <string>

namespace pitchrl::physics {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

bool finite(double x) { return std::isfinite(x); }

PlantState advance(const PlantState& s, const PlantRates& k, double h) {
    return {s.phi + h * k.phi, s.phi_dot + h * k.phi_dot, s.omega1 + h * k.omega1,
            s.omega2 + h * k.omega2};
}

}  // namespace

void MotorParams::validate() const {
    require(resistance > 0.0 && finite(resistance), "motor.resistance must be > 0");
    require(motor_constant > 0.0 && finite(motor_constant), "motor.motor_constant must be > 0");
    require(rotor_inertia > 0.0 && finite(rotor_inertia), "motor.rotor_inertia must be > 0");
    require(viscous_friction > 0.0 && finite(viscous_friction),
            "motor.viscous_friction must be > 0");
}

void PitchParams::validate() const {
    require(inertia > 0.0 && finite(inertia), "pitch.inertia must be > 0");
    require(moment_arm > 0.0 && finite(moment_arm), "pitch.moment_arm must be > 0");
    require(thrust_coefficient > 0.0 && finite(thrust_coefficient),
            "pitch.thrust_coefficient must be > 0");
    require(damping >= 0.0 && finite(damping), "pitch.damping must be >= 0");
    require(stiffness >= 0.0 && finite(stiffness), "pitch.stiffness must be >= 0");
}

void SimConfig::validate() const {
    require(dt > 0.0 && finite(dt), "sim.dt must be > 0");
    require(substeps >= 1, "sim.substeps must be >= 1");
}

bool PlantState::finite() const {
    return std::isfinite(phi) && std::isfinite(phi_dot) && std::isfinite(omega1) &&
           std::isfinite(omega2);
}

double pitch_fixed_point(double volts, const PlantParams& p) {
    if (!(p.pitch.stiffness > 0.0)) {
        throw std::invalid_argument("pitch fixed point needs a positive stiffness");
    }
    const double w1 = steady_state_speed(volts, p.motor);
    const double w2 = steady_state_speed(-volts, p.motor);
    return p.pitch.moment_arm * p.pitch.thrust_coefficient * (w1 - w2) / p.pitch.stiffness;
}

PlantRates plant_derivative(const PlantState& s, double volts, const PlantParams& p) {
    const PitchParams& pp = p.pitch;
    const double torque = pp.moment_arm * pp.thrust_coefficient * (s.omega1 - s.omega2);
    return {s.phi_dot, (torque - pp.damping * s.phi_dot - pp.stiffness * s.phi) / pp.inertia,
            motor_accel(volts, s.omega1, p.motor), motor_accel(-volts, s.omega2, p.motor)};
}

PlantState step(const PlantState& s, double volts, const SimConfig& cfg, const PlantParams& p) {
    if (!s.finite() || !std::isfinite(volts)) {
        throw NumericError("plant step received a non-finite state or input");
    }
    const double h = cfg.dt / cfg.substeps;
    PlantState x = s;
    for (int i = 0; i < cfg.substeps; ++i) {
        const PlantRates k1 = plant_derivative(x, volts, p);
        const PlantRates k2 = plant_derivative(advance(x, k1, 0.5 * h), volts, p);
        const PlantRates k3 = plant_derivative(advance(x, k2, 0.5 * h), volts, p);
        const PlantRates k4 = plant_derivative(advance(x, k3, h), volts, p);
        x.phi += h / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
        x.phi_dot += h / 6.0 * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot);
        x.omega1 += h / 6.0 * (k1.omega1 + 2.0 * k2.omega1 + 2.0 * k3.omega1 + k4.omega1);
        x.omega2 += h / 6.0 * (k1.omega2 + 2.0 * k2.omega2 + 2.0 * k3.omega2 + k4.omega2);
    }
    if (!x.finite()) throw NumericError("plant state diverged to a non-finite value");
    return x;
}

double electrical_power(double volts, const PlantState& s, const MotorParams& p) {
    const double i1 = motor_current(volts, s.omega1, p);
    const double i2 = motor_current(-volts, s.omega2, p);
    return std::abs(volts * i1) + std::abs(-volts * i2);
}

}  // namespace pitchrl::physics
