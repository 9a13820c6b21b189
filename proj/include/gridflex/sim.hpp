#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridflex/grid.hpp"
#include "gridflex/sysid.hpp"

namespace gridflex::sim {

struct Pulse {
    double t_start = 0.0;
    double t_end = 0.0;
    double magnitude = 0.0;
};

struct DisturbanceSchedule {
    std::vector<Pulse> pulses;

    void validate() const;
};

/// Sum of active pulses; a pulse is active on [t_start, t_end).
double evaluate_disturbance(const DisturbanceSchedule& schedule, double t);

enum class AncillaryMode { off, ideal, lagged, arx };

const char* to_string(AncillaryMode mode);

struct AncillaryPath {
    AncillaryMode mode = AncillaryMode::off;
    double lag_s = 1.0;                   ///< lagged: actuation time constant
    std::optional<sysid::ArxModel> model; ///< arx: identified fan dynamics
};

struct Scenario {
    std::string label;
    grid::GridParameters grid;
    DisturbanceSchedule schedule;
    double horizon = 50.0;
    double dt = 0.005;
    AncillaryPath ancillary;

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
    std::size_t step_count() const;
};

struct TrajectorySummary {
    double max_abs_domega = 0.0;
    double time_of_max = 0.0;
    double integral_abs_domega = 0.0;  ///< trapezoidal, p.u. s
    double ancillary_energy = 0.0;     ///< sum of applied P_anc * dt over the horizon, p.u. s
    double settling_time = 0.0;        ///< first time after which |domega| stays within 2% of its peak
};

struct Trajectory {
    std::string label;
    double dt = 0.0;
    double omega_des = 1.0;
    std::vector<double> time;
    std::vector<grid::SignalBus> samples;
    TrajectorySummary summary;
    bool aborted = false;
    std::string diagnostic;
};

TrajectorySummary summarize(std::span<const double> time, std::span<const grid::SignalBus> samples, double omega_des,
                            double dt);

/// Fixed-step closed-loop simulation. Each step: read omega, update AGC,
/// compute the ancillary command and route it through the ancillary path,
/// apply the disturbance, advance the plant by one RK4 step with all inputs
/// held. Stops early (aborted = true) if |omega - omega_des| exceeds 1 p.u.
Trajectory run_scenario(const Scenario& scenario);

/// Runs scenarios on worker threads; results keep the input order.
std::vector<Trajectory> run_scenarios(std::span<const Scenario> scenarios, unsigned workers = 0);

struct ComparisonRow {
    std::string label;
    TrajectorySummary summary;
    int rank_by_max = 0;       ///< 1 = smallest max |domega|
    int rank_by_integral = 0;  ///< 1 = smallest integral |domega|
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::vector<std::string> order_by_max;       ///< labels, best first
    std::vector<std::string> order_by_integral;  ///< labels, best first
    bool max_strictly_decreasing = false;        ///< along the given order
    bool integral_strictly_decreasing = false;
};

/// Throws std::invalid_argument for fewer than two trajectories or mismatched
/// time grids.
Comparison compare_trajectories(std::span<const Trajectory> trajectories);

/// Runs and compares scenarios that share horizon and dt.
Comparison compare_scenarios(std::span<const Scenario> scenarios);

}  // namespace gridflex::sim
