#include "gridflex/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace gridflex::sysid {

int ArxOrders::history() const {
    return std::max(na, nk + nb);
}

void ArxOrders::validate() const {
    if (na < 0) throw std::invalid_argument("ARX order na must be >= 0");
    if (nb < 1) throw std::invalid_argument("ARX order nb must be >= 1");
    if (nk < 0) throw std::invalid_argument("ARX delay nk must be >= 0");
}

double ArxModel::static_gain() const {
    const double sum_a = std::accumulate(a().begin(), a().end(), 0.0);
    const double sum_b = std::accumulate(b().begin(), b().end(), 0.0);
    if (1.0 + sum_a == 0.0) throw std::domain_error("ARX model has a pole at z = 1; static gain undefined");
    return sum_b / (1.0 + sum_a);
}

void ArxModel::validate() const {
    orders.validate();
    if (theta.size() != static_cast<std::size_t>(orders.parameter_count())) {
        throw std::invalid_argument("ARX theta length " + std::to_string(theta.size()) + " does not equal na + nb = " +
                                    std::to_string(orders.parameter_count()));
    }
    if (!(sample_period > 0.0)) throw std::invalid_argument("ARX sample period must be positive");
    for (double v : theta) {
        if (!std::isfinite(v)) throw std::invalid_argument("ARX theta has a non-finite entry");
    }
}

void IoRecord::validate() const {
    if (u.size() != y.size()) {
        throw std::invalid_argument("input and output series differ in length (" + std::to_string(u.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    if (u.empty()) throw std::invalid_argument("I/O record is empty");
    if (!timestamps.empty() && timestamps.size() != u.size()) {
        throw std::invalid_argument("timestamp count does not match sample count");
    }
    if (!(sample_period > 0.0)) throw std::invalid_argument("sample period must be positive");
}

ExcitationError::ExcitationError(int rank, int required)
    : std::runtime_error("input is not persistently exciting: regressor matrix rank " + std::to_string(rank) +
                         " < required " + std::to_string(required) + " (rank defect " +
                         std::to_string(required - rank) + ")"),
      rank_(rank),
      required_(required) {}

RegressorSet build_regressors(const IoRecord& data, const ArxOrders& orders) {
    orders.validate();
    data.validate();
    const int minimum = orders.na + orders.nb + orders.nk + 1;
    const auto length = static_cast<int>(data.size());
    if (length < minimum) {
        throw std::invalid_argument("series too short for orders (na=" + std::to_string(orders.na) +
                                    ", nb=" + std::to_string(orders.nb) + ", nk=" + std::to_string(orders.nk) +
                                    "): need at least " + std::to_string(minimum) + " samples, got " +
                                    std::to_string(length));
    }

    RegressorSet reg;
    reg.orders = orders;
    reg.sample_period = data.sample_period;
    reg.offset = orders.history();
    const int rows = length - reg.offset;
    reg.phi.resize(orders.parameter_count(), rows);
    reg.y.resize(rows);

    for (int k = 0; k < rows; ++k) {
        const int t = reg.offset + k;
        for (int i = 1; i <= orders.na; ++i) {
            reg.phi(i - 1, k) = -data.y[static_cast<std::size_t>(t - i)];
        }
        for (int j = 1; j <= orders.nb; ++j) {
            reg.phi(orders.na + j - 1, k) = data.u[static_cast<std::size_t>(t - orders.nk - j)];
        }
        reg.y(k) = data.y[static_cast<std::size_t>(t)];
    }
    return reg;
}

namespace {

struct LeastSquares {
    Eigen::VectorXd theta;
    int rank = 0;
    int rows = 0;
    double residual_rms = 0.0;
};

LeastSquares solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    const auto params = static_cast<int>(design.cols());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    LeastSquares ls;
    ls.rank = static_cast<int>(qr.rank());
    if (ls.rank < params) throw ExcitationError(ls.rank, params);
    ls.theta = qr.solve(y);
    ls.rows = static_cast<int>(design.rows());
    ls.residual_rms = std::sqrt((y - design * ls.theta).squaredNorm() / static_cast<double>(design.rows()));
    return ls;
}

}  // namespace

ArxFit fit_arx(const RegressorSet& reg) {
    const int params = reg.orders.parameter_count();
    if (reg.phi.rows() != params) throw std::invalid_argument("regressor matrix row count does not match orders");
    if (reg.phi.cols() < params) {
        throw std::invalid_argument("fewer regressor columns (" + std::to_string(reg.phi.cols()) +
                                    ") than parameters (" + std::to_string(params) + ")");
    }

    const LeastSquares ls = solve_least_squares(reg.phi.transpose(), reg.y);
    ArxFit fit;
    fit.model.orders = reg.orders;
    fit.model.sample_period = reg.sample_period;
    fit.model.theta.assign(ls.theta.data(), ls.theta.data() + ls.theta.size());
    fit.diagnostics.rank = ls.rank;
    fit.diagnostics.rows = ls.rows;
    fit.diagnostics.residual_rms = ls.residual_rms;
    return fit;
}

namespace {

// Deviation-coordinate input at index t; samples before the record sit at the
// operating point.
double input_deviation(const ArxModel& model, std::span<const double> u, long t) {
    return t < 0 ? 0.0 : u[static_cast<std::size_t>(t)] - model.u_offset;
}

}  // namespace

ArxSimulation simulate_arx(const ArxModel& model, std::span<const double> u, std::span<const double> y_init) {
    model.validate();
    const auto na = static_cast<std::size_t>(model.orders.na);
    if (y_init.size() < na) {
        throw std::invalid_argument("simulate_arx needs at least na = " + std::to_string(na) + " seed outputs");
    }
    const auto a = model.a();
    const auto b = model.b();

    ArxSimulation sim;
    sim.y.reserve(u.size());
    std::vector<double> dev;  // output deviations
    dev.reserve(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        double yd;
        if (t < na) {
            yd = y_init[t] - model.y_offset;
        } else {
            yd = 0.0;
            for (std::size_t i = 1; i <= na; ++i) yd -= a[i - 1] * dev[t - i];
            for (std::size_t j = 1; j <= b.size(); ++j) {
                yd += b[j - 1] * input_deviation(model, u, static_cast<long>(t) - model.orders.nk - static_cast<long>(j));
            }
        }
        if (!std::isfinite(yd)) {
            sim.truncated = true;
            sim.diagnostic = "free-run output became non-finite at sample " + std::to_string(t) +
                             "; model is unstable for this input";
            break;
        }
        dev.push_back(yd);
        sim.y.push_back(yd + model.y_offset);
    }
    return sim;
}

std::vector<double> predict_one_step(const ArxModel& model, std::span<const double> u,
                                     std::span<const double> y_measured) {
    model.validate();
    if (u.size() != y_measured.size()) throw std::invalid_argument("predict_one_step: length mismatch");
    const auto na = static_cast<std::size_t>(model.orders.na);
    const auto a = model.a();
    const auto b = model.b();

    std::vector<double> out(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        if (t < na) {
            out[t] = y_measured[t];
            continue;
        }
        double yd = 0.0;
        for (std::size_t i = 1; i <= na; ++i) yd -= a[i - 1] * (y_measured[t - i] - model.y_offset);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            yd += b[j - 1] * input_deviation(model, u, static_cast<long>(t) - model.orders.nk - static_cast<long>(j));
        }
        out[t] = yd + model.y_offset;
    }
    return out;
}

double fit_metric(std::span<const double> measured, std::span<const double> simulated) {
    if (measured.size() != simulated.size()) throw std::invalid_argument("fit_metric: length mismatch");
    if (measured.size() < 2) throw std::invalid_argument("fit_metric: need at least two samples");
    const double mean = std::accumulate(measured.begin(), measured.end(), 0.0) / static_cast<double>(measured.size());
    double err = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        err += (measured[i] - simulated[i]) * (measured[i] - simulated[i]);
        spread += (measured[i] - mean) * (measured[i] - mean);
    }
    if (spread == 0.0) throw std::invalid_argument("fit_metric: measured series is constant");
    return 100.0 * (1.0 - std::sqrt(err) / std::sqrt(spread));
}

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Scored {
    ArxFit fit;
    double free_run = 0.0;
    double one_step = 0.0;
};

Scored fit_and_score(const IoRecord& data, const ArxOrders& orders, std::size_t n_est, double u0, double y0) {
    IoRecord est;
    est.sample_period = data.sample_period;
    est.u.reserve(n_est);
    est.y.reserve(n_est);
    for (std::size_t i = 0; i < n_est; ++i) {
        est.u.push_back(data.u[i] - u0);
        est.y.push_back(data.y[i] - y0);
    }

    // An intercept column absorbs any mismatch between the window means and a
    // true equilibrium; it is folded into the output operating point.
    const RegressorSet reg = build_regressors(est, orders);
    const int params = orders.parameter_count();
    Eigen::MatrixXd design(reg.phi.cols(), params + 1);
    design.leftCols(params) = reg.phi.transpose();
    design.col(params).setOnes();
    if (design.rows() < design.cols()) {
        throw std::invalid_argument("estimation window too short for orders with intercept");
    }
    const LeastSquares ls = solve_least_squares(design, reg.y);

    Scored s;
    s.fit.model.orders = orders;
    s.fit.model.sample_period = data.sample_period;
    s.fit.model.theta.assign(ls.theta.data(), ls.theta.data() + params);
    s.fit.diagnostics = {ls.residual_rms, ls.rank, ls.rows};
    const double intercept = ls.theta(params);
    const double loop = 1.0 + std::accumulate(s.fit.model.a().begin(), s.fit.model.a().end(), 0.0);
    s.fit.model.u_offset = u0;
    // At a unit root the intercept has no equilibrium meaning; drop it.
    s.fit.model.y_offset = std::abs(loop) > 1e-12 ? y0 + intercept / loop : y0;

    const std::span<const double> u(data.u);
    const std::span<const double> y(data.y);
    const auto tail = y.subspan(n_est);

    const ArxSimulation sim = simulate_arx(s.fit.model, u, y);
    if (sim.truncated) {
        s.free_run = -std::numeric_limits<double>::infinity();
    } else {
        s.free_run = fit_metric(tail, std::span<const double>(sim.y).subspan(n_est));
    }
    const std::vector<double> pred = predict_one_step(s.fit.model, u, y);
    s.one_step = fit_metric(tail, std::span<const double>(pred).subspan(n_est));
    return s;
}

}  // namespace

IdentificationResult identify(const IoRecord& data, std::optional<ArxOrders> orders, const IdentifyOptions& options) {
    data.validate();
    if (!(options.validation_fraction > 0.0 && options.validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0, 1)");
    }
    const std::size_t total = data.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(total) * options.validation_fraction));
    const std::size_t n_est = total - n_val;
    if (n_val < 2) throw std::invalid_argument("record too short to hold out a validation tail");

    const double u0 = mean_of(std::span<const double>(data.u).first(n_est));
    const double y0 = mean_of(std::span<const double>(data.y).first(n_est));

    IdentificationResult result;
    result.estimation_samples = n_est;
    result.validation_samples = n_val;

    auto adopt = [&](const Scored& s) {
        result.model = s.fit.model;
        result.diagnostics = s.fit.diagnostics;
        result.validation_fit_free_run = s.free_run;
        result.validation_fit_one_step = s.one_step;
    };

    if (orders) {
        adopt(fit_and_score(data, *orders, n_est, u0, y0));
        return result;
    }

    std::optional<Scored> best;
    std::optional<ExcitationError> last_excitation;
    for (int na = 0; na <= options.max_na; ++na) {
        for (int nb = 1; nb <= options.max_nb; ++nb) {
            for (int nk = 0; nk <= options.max_nk; ++nk) {
                const ArxOrders candidate{na, nb, nk};
                CandidateScore score{candidate, std::numeric_limits<double>::quiet_NaN(), {}};
                try {
                    Scored s = fit_and_score(data, candidate, n_est, u0, y0);
                    score.validation_fit = s.free_run;
                    const bool better =
                        !best || s.free_run > best->free_run + 1e-9 ||
                        (std::abs(s.free_run - best->free_run) <= 1e-9 &&
                         candidate.parameter_count() < best->fit.model.orders.parameter_count());
                    if (better) best = std::move(s);
                } catch (const ExcitationError& e) {
                    score.note = e.what();
                    last_excitation = e;
                } catch (const std::invalid_argument& e) {
                    score.note = e.what();
                }
                result.candidates.push_back(std::move(score));
            }
        }
    }
    if (!best) {
        if (last_excitation) throw *last_excitation;
        throw std::invalid_argument("no candidate ARX order could be fit to the record");
    }
    adopt(*best);
    return result;
}

}  // namespace gridflex::sysid
