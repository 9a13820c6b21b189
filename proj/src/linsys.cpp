#include "gridflex/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gridflex::linsys {

namespace {

void trim_trailing_zeros(Polynomial& p) {
    while (p.size() > 1 && p.back() == 0.0) {
        p.pop_back();
    }
}

double max_abs(const Polynomial& p) {
    double m = 0.0;
    for (double c : p) m = std::max(m, std::abs(c));
    return m;
}

bool all_finite(const Eigen::VectorXd& v) {
    return v.allFinite();
}

}  // namespace

Polynomial poly_multiply(const Polynomial& p, const Polynomial& q) {
    if (p.empty() || q.empty()) return {0.0};
    Polynomial r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < q.size(); ++j) {
            r[i + j] += p[i] * q[j];
        }
    }
    return r;
}

Polynomial poly_add(const Polynomial& p, const Polynomial& q) {
    Polynomial r(std::max(p.size(), q.size()), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) r[i] += p[i];
    for (std::size_t i = 0; i < q.size(); ++i) r[i] += q[i];
    return r;
}

Polynomial poly_scale(const Polynomial& p, double k) {
    Polynomial r(p);
    for (double& c : r) c *= k;
    return r;
}

std::complex<double> poly_evaluate(const Polynomial& p, std::complex<double> s) {
    // Horner from the highest coefficient down.
    std::complex<double> acc{0.0, 0.0};
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

TransferFunction::TransferFunction(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
    if (num_.empty()) num_.push_back(0.0);
    if (den_.empty()) throw std::invalid_argument("transfer function denominator is empty");
    for (double c : num_) {
        if (!std::isfinite(c)) throw std::invalid_argument("transfer function numerator has a non-finite coefficient");
    }
    for (double c : den_) {
        if (!std::isfinite(c)) throw std::invalid_argument("transfer function denominator has a non-finite coefficient");
    }
    trim_trailing_zeros(num_);
    trim_trailing_zeros(den_);
    if (den_.back() == 0.0) throw std::invalid_argument("transfer function denominator is identically zero");
}

TransferFunction TransferFunction::gain(double k) {
    return TransferFunction({k}, {1.0});
}

TransferFunction TransferFunction::first_order_lag(double tau) {
    if (tau == 0.0) return gain(1.0);
    return TransferFunction({1.0}, {1.0, tau});
}

std::complex<double> TransferFunction::evaluate(std::complex<double> s) const {
    return poly_evaluate(num_, s) / poly_evaluate(den_, s);
}

double TransferFunction::dc_gain() const {
    if (den_.front() == 0.0) throw std::domain_error("transfer function has a pole at s = 0; DC gain undefined");
    return num_.front() / den_.front();
}

TransferFunction tf_series(const TransferFunction& g, const TransferFunction& h) {
    return TransferFunction(poly_multiply(g.num(), h.num()), poly_multiply(g.den(), h.den()));
}

TransferFunction tf_parallel_weighted(std::span<const WeightedTerm> terms) {
    if (terms.empty()) throw std::invalid_argument("tf_parallel_weighted needs at least one term");

    Polynomial common{1.0};
    for (const auto& term : terms) common = poly_multiply(common, term.tf.den());

    Polynomial num{0.0};
    for (std::size_t i = 0; i < terms.size(); ++i) {
        Polynomial part = poly_scale(terms[i].tf.num(), terms[i].weight);
        for (std::size_t j = 0; j < terms.size(); ++j) {
            if (j != i) part = poly_multiply(part, terms[j].tf.den());
        }
        num = poly_add(num, part);
    }
    return TransferFunction(std::move(num), std::move(common));
}

TransferFunction tf_feedback(const TransferFunction& forward, const TransferFunction& feedback) {
    const Polynomial open_den = poly_multiply(forward.den(), feedback.den());
    const Polynomial open_num = poly_multiply(forward.num(), feedback.num());
    Polynomial den = poly_add(open_den, open_num);

    const double scale = std::max(max_abs(open_den), max_abs(open_num));
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    if (std::all_of(den.begin(), den.end(), [tol](double c) { return std::abs(c) <= tol; })) {
        throw std::domain_error("degenerate algebraic loop: 1 + forward*feedback is identically zero");
    }
    return TransferFunction(poly_multiply(forward.num(), feedback.den()), std::move(den));
}

void StateSpaceModel::validate() const {
    const auto n = A.rows();
    if (A.cols() != n) throw std::invalid_argument("state matrix A must be square");
    if (B.rows() != n) throw std::invalid_argument("B row count must equal state dimension");
    if (C.cols() != n) throw std::invalid_argument("C column count must equal state dimension");
    if (D.rows() != C.rows() || D.cols() != B.cols()) {
        throw std::invalid_argument("D must be outputs x inputs");
    }
}

StateSpaceModel realize(const TransferFunction& tf) {
    if (!tf.is_proper()) {
        throw std::invalid_argument("cannot realize improper transfer function (numerator degree " +
                                    std::to_string(tf.num_degree()) + " > denominator degree " +
                                    std::to_string(tf.den_degree()) + ")");
    }
    const std::size_t n = tf.den_degree();
    const double lead = tf.den().back();

    Polynomial den = poly_scale(tf.den(), 1.0 / lead);
    Polynomial num = poly_scale(tf.num(), 1.0 / lead);
    num.resize(n + 1, 0.0);

    const double feedthrough = num[n];
    // Strictly proper remainder: num - D*den, degree < n.
    Polynomial rem(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rem[i] = num[i] - feedthrough * den[i];

    StateSpaceModel ss;
    ss.D = Eigen::MatrixXd::Constant(1, 1, feedthrough);
    if (std::all_of(rem.begin(), rem.end(), [](double c) { return c == 0.0; })) {
        ss.A = Eigen::MatrixXd::Zero(0, 0);
        ss.B = Eigen::MatrixXd::Zero(0, 1);
        ss.C = Eigen::MatrixXd::Zero(1, 0);
        return ss;
    }

    const auto dim = static_cast<Eigen::Index>(n);
    ss.A = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i + 1 < dim; ++i) ss.A(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < dim; ++j) ss.A(dim - 1, j) = -den[static_cast<std::size_t>(j)];
    ss.B = Eigen::MatrixXd::Zero(dim, 1);
    ss.B(dim - 1, 0) = 1.0;
    ss.C = Eigen::MatrixXd::Zero(1, dim);
    for (Eigen::Index j = 0; j < dim; ++j) ss.C(0, j) = rem[static_cast<std::size_t>(j)];
    return ss;
}

std::complex<double> frequency_response(const StateSpaceModel& model, std::complex<double> s, Eigen::Index output,
                                        Eigen::Index input) {
    model.validate();
    const auto n = model.states();
    std::complex<double> result = model.D(output, input);
    if (n == 0) return result;

    const Eigen::MatrixXcd resolvent =
        s * Eigen::MatrixXcd::Identity(n, n) - model.A.cast<std::complex<double>>();
    const Eigen::VectorXcd x = resolvent.partialPivLu().solve(model.B.col(input).cast<std::complex<double>>());
    return result + (model.C.row(output).cast<std::complex<double>>() * x)(0);
}

StepResult step_rk4(const StateSpaceModel& model, const Eigen::VectorXd& state, const Eigen::VectorXd& input,
                    double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step_rk4: dt must be positive and finite");
    if (state.size() != model.states()) throw std::invalid_argument("step_rk4: state dimension mismatch");
    if (input.size() != model.inputs()) throw std::invalid_argument("step_rk4: input dimension mismatch");
    if (!all_finite(state)) throw std::invalid_argument("step_rk4: non-finite state");
    if (!all_finite(input)) throw std::invalid_argument("step_rk4: non-finite input");

    const Eigen::VectorXd forcing = model.B * input;
    auto derivative = [&](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return model.A * x + forcing; };

    StepResult r;
    r.next_state = rk4_step(derivative, 0.0, state, dt);
    r.output = model.C * r.next_state + model.D * input;
    return r;
}

double default_time_step(std::span<const double> time_constants) {
    double dt = 0.01;
    for (double tau : time_constants) {
        if (tau > 0.0) dt = std::min(dt, tau / 20.0);
    }
    return dt;
}

}  // namespace gridflex::linsys
