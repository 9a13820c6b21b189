#pragma once

#include <span>
#include <vector>

#include "gridflex/linsys.hpp"

// Single-area power system: governor, turbine, generator, droop loop,
// integral AGC and the saturated proportional ancillary controller.
// All quantities are per-unit; omega is per-unit of rated frequency.
namespace gridflex::grid {

struct GridParameters {
    double M = 132.6;      ///< inertia
    double M_base = 1.0;   ///< power base M is divided by; 1 takes M as already per-unit
    double D = 0.0265;     ///< damping
    double T1 = 0.1;       ///< governor lag (s)
    double T2 = 0.0;       ///< governor lead (s)
    double T3 = 0.1;       ///< governor lag (s)
    double T4 = 1.0;       ///< steam chest (s)
    double T5 = 0.0;       ///< piping (s)
    double T6 = 0.0;       ///< reheater (s)
    double T7 = 0.0;       ///< cross-over (s)
    double K1 = 1.0;
    double K2 = 0.0;
    double K3 = 0.0;
    double K4 = 0.0;
    double R = 0.05;       ///< droop; +inf disables the droop path
    double omega_des = 1.0;
    double Kp = 45.0;      ///< ancillary proportional gain
    double anc_min = -0.3;
    double anc_max = 0.3;
    bool agc_enabled = false;
    double agc_gain = 0.0; ///< integral gain (p.u./s)

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
    /// Governor and turbine time constants (zeros included).
    std::vector<double> time_constants() const;
    double inertia() const { return M / M_base; }
};

/// One recorded sample of every loop signal.
struct SignalBus {
    double delta_PD = 0.0;  ///< load disturbance
    double delta_PC = 0.0;  ///< AGC speed-changer signal
    double P_anc = 0.0;     ///< ancillary injection
    double omega = 1.0;     ///< frequency (absolute, p.u.)
    double P_GV = 0.0;      ///< governor valve output
    double delta_PM = 0.0;  ///< mechanical power deviation
    double delta_PG = 0.0;  ///< electrical generation increase, delta_PD - P_anc
};

/// (1 + s T2) / ((1 + s T1)(1 + s T3))
linsys::TransferFunction governor_tf(const GridParameters& p);

/// K1 F1 + K2 F1 F2 + K3 F1 F2 F3 + K4 F1 F2 F3 F4 with F_i = 1/(1 + s T_{3+i}),
/// evaluated in nested form F1 (K1 + F2 (K2 + F3 (K3 + F4 K4))) so no stage
/// denominator is repeated.
linsys::TransferFunction turbine_tf(const GridParameters& p);

/// 1 / (D + s M / M_base)
linsys::TransferFunction generator_tf(const GridParameters& p);

/// Transfer function from delta_PD to frequency deviation with the droop loop
/// closed and no AGC or ancillary action.
linsys::TransferFunction disturbance_tf(const GridParameters& p);

/// Proportional command -Kp (omega - omega_des), clipped to anc_min when
/// omega >= omega_des and to anc_max otherwise.
double ancillary_power(double omega, const GridParameters& p);

/// Trapezoidal integral of the frequency error; delta_PC = -gain * integral.
class AgcIntegrator {
public:
    explicit AgcIntegrator(double gain) : gain_(gain) {}

    /// Feeds the frequency at the next sample and returns delta_PC there.
    double update(double omega, double omega_des, double dt);
    double output() const { return -gain_ * integral_; }

private:
    double gain_;
    double integral_ = 0.0;
    double previous_error_ = 0.0;
    bool started_ = false;
};

/// delta_PC after consuming a uniformly sampled frequency history. Returns 0
/// when AGC is disabled.
double agc_signal(std::span<const double> omega_history, const GridParameters& p, double dt);

/// Closed droop loop as one state-space model.
/// Inputs:  0 = delta_PD, 1 = delta_PC, 2 = P_anc.
/// Outputs: 0 = omega deviation, 1 = P_GV, 2 = delta_PM.
struct ClosedLoop {
    static constexpr Eigen::Index kDisturbance = 0;
    static constexpr Eigen::Index kSpeedChanger = 1;
    static constexpr Eigen::Index kAncillary = 2;
    static constexpr Eigen::Index kOmega = 0;
    static constexpr Eigen::Index kValve = 1;
    static constexpr Eigen::Index kMechanical = 2;

    linsys::StateSpaceModel model;
};

ClosedLoop build_closed_loop(const GridParameters& p);

}  // namespace gridflex::grid
