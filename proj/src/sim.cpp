#include "gridflex/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace gridflex::sim {

void DisturbanceSchedule::validate() const {
    for (const auto& p : pulses) {
        if (!std::isfinite(p.t_start) || !std::isfinite(p.t_end) || !std::isfinite(p.magnitude)) {
            throw std::invalid_argument("disturbance pulse has a non-finite field");
        }
        if (!(p.t_start < p.t_end)) {
            throw std::invalid_argument(fmt::format("disturbance pulse must have start < end (got {} >= {})",
                                                    p.t_start, p.t_end));
        }
        if (p.t_start < 0.0) throw std::invalid_argument("disturbance pulse starts before t = 0");
    }
}

double evaluate_disturbance(const DisturbanceSchedule& schedule, double t) {
    double total = 0.0;
    for (const auto& p : schedule.pulses) {
        if (t >= p.t_start && t < p.t_end) total += p.magnitude;
    }
    return total;
}

const char* to_string(AncillaryMode mode) {
    switch (mode) {
        case AncillaryMode::off: return "off";
        case AncillaryMode::ideal: return "ideal";
        case AncillaryMode::lagged: return "lagged";
        case AncillaryMode::arx: return "arx";
    }
    return "unknown";
}

namespace {

bool is_multiple(double value, double step) {
    const double ratio = value / step;
    return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

}  // namespace

std::size_t Scenario::step_count() const {
    const double ratio = horizon / dt;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
}

void Scenario::validate() const {
    if (label.empty()) throw std::invalid_argument("scenario label must not be empty");
    grid.validate();
    schedule.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(horizon >= dt) || !std::isfinite(horizon)) {
        throw std::invalid_argument(fmt::format("dt ({}) must not exceed horizon ({})", dt, horizon));
    }

    std::vector<double> taus = grid.time_constants();
    if (ancillary.mode == AncillaryMode::lagged) {
        if (!(ancillary.lag_s > 0.0)) throw std::invalid_argument("lagged ancillary path needs lag > 0");
        taus.push_back(ancillary.lag_s);
    }
    double smallest = 0.0;
    for (double tau : taus) {
        if (tau > 0.0 && (smallest == 0.0 || tau < smallest)) smallest = tau;
    }
    if (smallest > 0.0 && dt > smallest / 20.0 * (1.0 + 1e-12)) {
        throw std::invalid_argument(
            fmt::format("dt ({}) exceeds the smallest time constant / 20 ({})", dt, smallest / 20.0));
    }

    if (ancillary.mode == AncillaryMode::arx) {
        if (!ancillary.model) throw std::invalid_argument("arx ancillary path needs a model");
        ancillary.model->validate();
        if (!is_multiple(ancillary.model->sample_period, dt)) {
            throw std::invalid_argument("ARX sample period must be an integer multiple of dt");
        }
        const double gain = ancillary.model->static_gain();
        if (!std::isfinite(gain) || gain == 0.0) throw std::invalid_argument("ARX model has zero static gain");
    }
}

namespace {

// Identified fan dynamics in the ancillary path: the commanded power is
// mapped to a set-point deviation through the inverse static gain and the ARX
// output (a power deviation) is applied, held between ARX samples.
class ArxActuator {
public:
    ArxActuator(const sysid::ArxModel& model, double dt)
        : model_(model),
          inverse_gain_(1.0 / model.static_gain()),
          ticks_per_sample_(static_cast<std::size_t>(std::llround(model.sample_period / dt))) {
        const auto keep_u = static_cast<std::size_t>(model.orders.nk + model.orders.nb + 1);
        inputs_.assign(keep_u, 0.0);
        outputs_.assign(static_cast<std::size_t>(model.orders.na) + 1, 0.0);
    }

    /// Called every simulation step; returns the power currently applied.
    double on_step(std::size_t step, double command) {
        if (step % ticks_per_sample_ != 0) return output_;

        // inputs_[0] is the newest set-point deviation, inputs_[j] its j-th lag.
        inputs_.pop_back();
        inputs_.push_front(command * inverse_gain_);
        const auto a = model_.a();
        const auto b = model_.b();
        double y = 0.0;
        for (std::size_t i = 1; i <= a.size(); ++i) y -= a[i - 1] * outputs_[i - 1];
        for (std::size_t j = 1; j <= b.size(); ++j) {
            y += b[j - 1] * inputs_[static_cast<std::size_t>(model_.orders.nk) + j];
        }
        outputs_.pop_back();
        outputs_.push_front(y);
        output_ = y;
        return output_;
    }

private:
    sysid::ArxModel model_;
    double inverse_gain_;
    std::size_t ticks_per_sample_;
    std::deque<double> inputs_;
    std::deque<double> outputs_;
    double output_ = 0.0;
};

}  // namespace

TrajectorySummary summarize(std::span<const double> time, std::span<const grid::SignalBus> samples, double omega_des,
                            double dt) {
    TrajectorySummary s;
    if (samples.empty()) return s;
    std::vector<double> deviation(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) deviation[k] = std::abs(samples[k].omega - omega_des);

    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (deviation[k] > s.max_abs_domega) {
            s.max_abs_domega = deviation[k];
            s.time_of_max = time[k];
        }
        if (k + 1 < samples.size()) {
            s.integral_abs_domega += 0.5 * (deviation[k] + deviation[k + 1]) * dt;
            s.ancillary_energy += samples[k].P_anc * dt;
        }
    }

    const double band = 0.02 * s.max_abs_domega;
    s.settling_time = time.front();
    for (std::size_t k = samples.size(); k-- > 0;) {
        if (deviation[k] > band) {
            s.settling_time = k + 1 < samples.size() ? time[k + 1] : time[k];
            break;
        }
    }
    return s;
}

Trajectory run_scenario(const Scenario& scenario) {
    scenario.validate();
    const auto& p = scenario.grid;
    const grid::ClosedLoop loop = grid::build_closed_loop(p);
    const auto& model = loop.model;
    const Eigen::Index n = model.states();
    const bool lagged = scenario.ancillary.mode == AncillaryMode::lagged;
    const Eigen::Index lag_index = n;
    const double dt = scenario.dt;
    const std::size_t steps = scenario.step_count();

    Trajectory traj;
    traj.label = scenario.label;
    traj.dt = dt;
    traj.omega_des = p.omega_des;
    traj.time.reserve(steps + 1);
    traj.samples.reserve(steps + 1);

    Eigen::VectorXd state = Eigen::VectorXd::Zero(n + (lagged ? 1 : 0));
    grid::AgcIntegrator agc(p.agc_gain);
    std::optional<ArxActuator> actuator;
    if (scenario.ancillary.mode == AncillaryMode::arx) actuator.emplace(*scenario.ancillary.model, dt);

    Eigen::Vector3d input;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Eigen::VectorXd plant_state = state.head(n);
        const double domega = (model.C.row(grid::ClosedLoop::kOmega) * plant_state)(0);
        const double omega = p.omega_des + domega;

        grid::SignalBus bus;
        bus.omega = omega;
        bus.delta_PC = p.agc_enabled ? agc.update(omega, p.omega_des, dt) : 0.0;

        const double command = grid::ancillary_power(omega, p);
        switch (scenario.ancillary.mode) {
            case AncillaryMode::off: bus.P_anc = 0.0; break;
            case AncillaryMode::ideal: bus.P_anc = command; break;
            case AncillaryMode::lagged: bus.P_anc = state(lag_index); break;
            case AncillaryMode::arx: bus.P_anc = actuator->on_step(k, command); break;
        }

        // Held over [t, t + dt); the midpoint lookup keeps grid-aligned pulse
        // edges exact despite rounding in k * dt.
        bus.delta_PD = evaluate_disturbance(scenario.schedule, t + 0.5 * dt);
        bus.delta_PG = bus.delta_PD - bus.P_anc;

        input << bus.delta_PD, bus.delta_PC, bus.P_anc;
        const Eigen::VectorXd out = model.C * plant_state + model.D * input;
        bus.P_GV = out(grid::ClosedLoop::kValve);
        bus.delta_PM = out(grid::ClosedLoop::kMechanical);

        if (!std::isfinite(domega) || std::abs(domega) > 1.0) {
            traj.aborted = true;
            traj.diagnostic = fmt::format("numerical blow-up: |omega - omega_des| = {} p.u. exceeds 1 at t = {} s",
                                          std::abs(domega), t);
            break;
        }
        traj.time.push_back(t);
        traj.samples.push_back(bus);
        if (k == steps) break;

        const Eigen::VectorXd forcing = model.B * input;
        const double lag = scenario.ancillary.lag_s;
        auto derivative = [&](double, const Eigen::VectorXd& z) -> Eigen::VectorXd {
            Eigen::VectorXd dz(z.size());
            if (lagged) {
                // P_anc is a state here, so its input column is applied from z.
                dz.head(n) = model.A * z.head(n) + forcing +
                             model.B.col(grid::ClosedLoop::kAncillary) * (z(lag_index) - bus.P_anc);
                dz(lag_index) = (command - z(lag_index)) / lag;
            } else {
                dz = model.A * z + forcing;
            }
            return dz;
        };
        state = linsys::rk4_step(derivative, t, state, dt);
    }

    traj.summary = summarize(traj.time, traj.samples, p.omega_des, dt);
    return traj;
}

std::vector<Trajectory> run_scenarios(std::span<const Scenario> scenarios, unsigned workers) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<Trajectory> results(scenarios.size());
    for (std::size_t first = 0; first < scenarios.size(); first += workers) {
        const std::size_t last = std::min(scenarios.size(), first + workers);
        std::vector<std::future<Trajectory>> batch;
        for (std::size_t i = first; i < last; ++i) {
            batch.push_back(std::async(std::launch::async, [&scenarios, i] { return run_scenario(scenarios[i]); }));
        }
        for (std::size_t i = first; i < last; ++i) results[i] = batch[i - first].get();
    }
    return results;
}

Comparison compare_trajectories(std::span<const Trajectory> trajectories) {
    if (trajectories.size() < 2) throw std::invalid_argument("comparison needs at least two trajectories");
    const auto& ref = trajectories.front();
    for (const auto& tr : trajectories) {
        if (tr.dt != ref.dt || tr.time.size() != ref.time.size()) {
            throw std::invalid_argument(fmt::format("mismatched time grids: '{}' and '{}' differ in dt or horizon",
                                                    ref.label, tr.label));
        }
    }

    Comparison cmp;
    const std::size_t count = trajectories.size();
    for (const auto& tr : trajectories) cmp.rows.push_back({tr.label, tr.summary, 0, 0});

    auto rank = [&](auto key, auto rank_field, std::vector<std::string>& order) {
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return key(cmp.rows[a]) < key(cmp.rows[b]); });
        for (std::size_t r = 0; r < count; ++r) {
            cmp.rows[idx[r]].*rank_field = static_cast<int>(r) + 1;
            order.push_back(cmp.rows[idx[r]].label);
        }
    };
    auto by_max = [](const ComparisonRow& r) { return r.summary.max_abs_domega; };
    auto by_integral = [](const ComparisonRow& r) { return r.summary.integral_abs_domega; };
    rank(by_max, &ComparisonRow::rank_by_max, cmp.order_by_max);
    rank(by_integral, &ComparisonRow::rank_by_integral, cmp.order_by_integral);

    cmp.max_strictly_decreasing = true;
    cmp.integral_strictly_decreasing = true;
    for (std::size_t i = 1; i < count; ++i) {
        if (!(by_max(cmp.rows[i]) < by_max(cmp.rows[i - 1]))) cmp.max_strictly_decreasing = false;
        if (!(by_integral(cmp.rows[i]) < by_integral(cmp.rows[i - 1]))) cmp.integral_strictly_decreasing = false;
    }
    return cmp;
}

Comparison compare_scenarios(std::span<const Scenario> scenarios) {
    if (scenarios.size() < 2) throw std::invalid_argument("comparison needs at least two scenarios");
    for (const auto& s : scenarios) {
        if (s.horizon != scenarios.front().horizon || s.dt != scenarios.front().dt) {
            throw std::invalid_argument("scenarios to compare must share horizon and dt");
        }
    }
    const std::vector<Trajectory> runs = run_scenarios(scenarios);
    return compare_trajectories(runs);
}

}  // namespace gridflex::sim
