#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// ARX identification of the SISO fan model (input: supply duct static
// pressure set-point, output: fan power) and a synthetic fan-plant fixture.
//
// Lag convention, with 0-based sample index t:
//   y(t) = -a1*y(t-1) - ... - a_na*y(t-na)
//          + b1*u(t-nk-1) + ... + b_nb*u(t-nk-nb) + e(t)
// so nk counts the dead samples beyond the inherent one-step lag.
namespace gridflex::sysid {

struct ArxOrders {
    int na = 2;
    int nb = 2;
    int nk = 1;

    int parameter_count() const { return na + nb; }
    /// First sample index with complete lag history: max(na, nk + nb).
    int history() const;
    void validate() const;
    bool operator==(const ArxOrders&) const = default;
};

struct ArxModel {
    ArxOrders orders;
    /// a1..a_na followed by b1..b_nb.
    std::vector<double> theta;
    double sample_period = 1.0;
    /// Operating point removed before fitting; zero for a model fit on raw data.
    double u_offset = 0.0;
    double y_offset = 0.0;

    std::span<const double> a() const { return {theta.data(), static_cast<std::size_t>(orders.na)}; }
    std::span<const double> b() const {
        return {theta.data() + orders.na, static_cast<std::size_t>(orders.nb)};
    }
    /// sum(b) / (1 + sum(a)); throws std::domain_error at a unit root.
    double static_gain() const;
    void validate() const;
};

struct IoRecord {
    std::vector<double> u;
    std::vector<double> y;
    double sample_period = 1.0;
    std::vector<double> timestamps;  ///< empty, or one epoch-second per sample

    std::size_t size() const { return u.size(); }
    void validate() const;
};

struct RegressorSet {
    ArxOrders orders;
    double sample_period = 1.0;
    /// (na+nb) x rows; column k is phi(offset + k).
    Eigen::MatrixXd phi;
    Eigen::VectorXd y;
    int offset = 0;
};

struct FitDiagnostics {
    double residual_rms = 0.0;
    int rank = 0;
    int rows = 0;
};

struct ArxFit {
    ArxModel model;
    FitDiagnostics diagnostics;
};

/// Regressor matrix lacks full column rank: the input is not persistently
/// exciting for the requested orders.
class ExcitationError : public std::runtime_error {
public:
    ExcitationError(int rank, int required);
    int rank() const { return rank_; }
    int required() const { return required_; }

private:
    int rank_;
    int required_;
};

/// Throws std::invalid_argument when data.size() <= na + nb + nk; the message
/// names the minimum length.
RegressorSet build_regressors(const IoRecord& data, const ArxOrders& orders);

/// Least squares via column-pivoted Householder QR of Phi^T.
/// Throws ExcitationError when rank(Phi) < na + nb.
ArxFit fit_arx(const RegressorSet& reg);

struct ArxSimulation {
    std::vector<double> y;
    bool truncated = false;
    std::string diagnostic;
};

/// Free-run: predictions are fed back as lagged outputs. The first na samples
/// are taken from y_init (length >= na). Inputs and outputs are in raw units;
/// the model's operating point is removed and restored internally.
/// Input samples before t = 0 are treated as the operating point.
ArxSimulation simulate_arx(const ArxModel& model, std::span<const double> u, std::span<const double> y_init);

/// One-step-ahead prediction using measured lagged outputs. The first na
/// samples copy the measurement.
std::vector<double> predict_one_step(const ArxModel& model, std::span<const double> u,
                                     std::span<const double> y_measured);

/// 100 * (1 - ||y - yhat|| / ||y - mean(y)||). Throws std::invalid_argument for
/// length mismatch, fewer than two samples or constant measurement.
double fit_metric(std::span<const double> measured, std::span<const double> simulated);

struct IdentifyOptions {
    /// Fraction of the record held out (from the tail) for order selection and scoring.
    double validation_fraction = 0.3;
    int max_na = 3;
    int max_nb = 3;
    int max_nk = 2;
};

struct CandidateScore {
    ArxOrders orders;
    double validation_fit = 0.0;  ///< NaN when the fit failed
    std::string note;
};

struct IdentificationResult {
    ArxModel model;
    FitDiagnostics diagnostics;
    double validation_fit_free_run = 0.0;
    double validation_fit_one_step = 0.0;
    std::size_t estimation_samples = 0;
    std::size_t validation_samples = 0;
    std::vector<CandidateScore> candidates;  ///< empty when orders were given
};

/// Removes the estimation-window means, fits on the leading part of the record
/// (with an intercept, folded into the model's output operating point) and
/// scores free-run and one-step fits on the held-out tail. With no orders
/// given, every (na, nb, nk) up to the option limits is tried and the best
/// free-run validation fit wins (ties go to fewer parameters).
IdentificationResult identify(const IoRecord& data, std::optional<ArxOrders> orders,
                              const IdentifyOptions& options = {});

// ---------------------------------------------------------------------------
// Synthetic fan plant

struct FanFixtureConfig {
    double low_level = 1.2;   ///< in. of water
    double high_level = 1.9;  ///< in. of water
    int switch_period_min = 1;
    double span_min = 15.0;
    double sample_period_s = 1.0;
    double noise_std_kw = 0.25;
    std::uint64_t seed = 1;

    // Hidden reference plant.
    double pressure_time_constant_s = 6.0;
    int actuation_delay_samples = 1;
    double power_at_high_kw = 67.0;
    double power_swing_kw = 12.0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Square-wave set-point starting at the high level and toggling every
/// switch period; samples cover [0, span] inclusive. Duct pressure follows
/// the set-point through a first-order lag after the actuation delay and fan
/// power is a + b * pressure^1.5 calibrated to power_at_high_kw and
/// power_swing_kw, plus white Gaussian noise.
IoRecord generate_fan_fixture(const FanFixtureConfig& config);

/// Number of samples k >= 1 with u[k] != u[k-1].
std::size_t count_switching_edges(std::span<const double> u);

}  // namespace gridflex::sysid
