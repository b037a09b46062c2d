#pragma once

// Twin-rotor pitch plant: two DC motors (armature inductance neglected) drive
// opposed thrusters on a beam pivoting about one axis. Motor 1 receives +u,
// motor 2 receives -u. Thrust is proportional to rotor speed.

#include <array>
#include <stdexcept>
#include <string>

namespace pitchrl::physics {

// Raised when the integrated state leaves the finite range.
class NumericError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

struct MotorParams {
    double resistance = 8.4;          // ohm
    double motor_constant = 0.042;    // V*s/rad == N*m/A
    double rotor_inertia = 4.0e-6;    // kg*m^2
    double viscous_friction = 1.5e-5; // N*m*s/rad

    void validate() const;
};

struct PitchParams {
    double inertia = 0.0219;            // kg*m^2
    double damping = 0.0105;            // N*m*s/rad
    double stiffness = 0.0375;          // N*m/rad
    double thrust_coefficient = 1.0e-3; // N*s/rad
    double moment_arm = 0.158;          // m

    void validate() const;
};

struct PlantParams {
    MotorParams motor;
    PitchParams pitch;

    void validate() const { motor.validate(); pitch.validate(); }
};

// phi is kept unwrapped.
struct PlantState {
    double phi = 0.0;      // rad
    double phi_dot = 0.0;  // rad/s
    double omega1 = 0.0;   // rad/s
    double omega2 = 0.0;   // rad/s

    bool finite() const;
    std::array<double, 4> as_array() const { return {phi, phi_dot, omega1, omega2}; }
    static PlantState from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
    friend bool operator==(const PlantState&, const PlantState&) = default;
};

// Time derivative of PlantState, component for component.
struct PlantRates {
    double phi = 0.0;
    double phi_dot = 0.0;
    double omega1 = 0.0;
    double omega2 = 0.0;
};

struct SimConfig {
    double dt = 0.01;    // control period, s
    int substeps = 10;   // RK4 steps per control period

    void validate() const;
};

/// Armature current from u = i R + k_m omega.
inline double motor_current(double volts, double omega, const MotorParams& p) {
    return (volts - p.motor_constant * omega) / p.resistance;
}

/// Rotor acceleration from J_m domega/dt = k_m i - D_m omega.
inline double motor_accel(double volts, double omega, const MotorParams& p) {
    return (p.motor_constant * motor_current(volts, omega, p) - p.viscous_friction * omega) /
           p.rotor_inertia;
}

/// Rotor speed at which motor_accel vanishes: k_m u / (k_m^2 + D_m R).
inline double steady_state_speed(double volts, const MotorParams& p) {
    return p.motor_constant * volts /
           (p.motor_constant * p.motor_constant + p.viscous_friction * p.resistance);
}

/// First-order rotor time constant J_m R / (k_m^2 + D_m R).
inline double motor_time_constant(const MotorParams& p) {
    return p.rotor_inertia * p.resistance /
           (p.motor_constant * p.motor_constant + p.viscous_friction * p.resistance);
}

/// Pitch angle at rest under a held voltage. Requires stiffness > 0.
double pitch_fixed_point(double volts, const PlantParams& p);

PlantRates plant_derivative(const PlantState& s, double volts, const PlantParams& p);

/// Advance one control period with classical RK4 using cfg.substeps equal
/// substeps. Throws NumericError if the input or result is not finite.
PlantState step(const PlantState& s, double volts, const SimConfig& cfg, const PlantParams& p);

/// |u i1| + |(-u) i2|, watts. Never negative.
double electrical_power(double volts, const PlantState& s, const MotorParams& p);

/// Both motors at stall: 2 u^2 / R.
inline double stall_power(double volts, const MotorParams& p) {
    return 2.0 * volts * volts / p.resistance;
}

}  // namespace pitchrl::physics
