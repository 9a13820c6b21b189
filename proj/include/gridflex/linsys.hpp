#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

// Continuous-time SISO transfer-function algebra, controllable-canonical
// realization and a fixed-step RK4 integrator.
//
// Polynomials are stored in ASCENDING powers of s: {a0, a1, a2} is
// a0 + a1*s + a2*s^2.
namespace gridflex::linsys {

using Polynomial = std::vector<double>;

Polynomial poly_multiply(const Polynomial& p, const Polynomial& q);
Polynomial poly_add(const Polynomial& p, const Polynomial& q);
Polynomial poly_scale(const Polynomial& p, double k);
std::complex<double> poly_evaluate(const Polynomial& p, std::complex<double> s);

class TransferFunction {
public:
    /// Trailing (highest-order) exact zeros are trimmed from both polynomials.
    /// Throws std::invalid_argument if den is identically zero or any
    /// coefficient is not finite.
    TransferFunction(Polynomial num, Polynomial den);

    static TransferFunction gain(double k);
    /// 1 / (1 + s*tau); tau == 0 collapses to unity.
    static TransferFunction first_order_lag(double tau);

    const Polynomial& num() const { return num_; }
    const Polynomial& den() const { return den_; }
    std::size_t num_degree() const { return num_.size() - 1; }
    std::size_t den_degree() const { return den_.size() - 1; }
    bool is_proper() const { return num_degree() <= den_degree(); }

    std::complex<double> evaluate(std::complex<double> s) const;
    /// num(0)/den(0). Throws std::domain_error when den(0) == 0.
    double dc_gain() const;

private:
    Polynomial num_;
    Polynomial den_;
};

/// g*h
TransferFunction tf_series(const TransferFunction& g, const TransferFunction& h);

struct WeightedTerm {
    double weight;
    TransferFunction tf;
};

/// sum_i weight_i * tf_i over a common denominator (product of all term
/// denominators; no cancellation).
TransferFunction tf_parallel_weighted(std::span<const WeightedTerm> terms);

/// forward / (1 + forward*feedback). Throws std::domain_error on a degenerate
/// algebraic loop (closed-loop denominator identically zero).
TransferFunction tf_feedback(const TransferFunction& forward, const TransferFunction& feedback);

struct StateSpaceModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;

    Eigen::Index states() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }

    /// Throws std::invalid_argument if A,B,C,D are not conformable.
    void validate() const;
};

/// Controllable canonical form. A strictly proper remainder that is
/// identically zero yields a zero-state pass-through (pure D).
/// Throws std::invalid_argument for improper tf.
StateSpaceModel realize(const TransferFunction& tf);

/// C (sI - A)^-1 B + D for one input/output pair.
std::complex<double> frequency_response(const StateSpaceModel& model, std::complex<double> s,
                                        Eigen::Index output = 0, Eigen::Index input = 0);

/// One classical RK4 step of dx/dt = f(t, x).
template <class Derivative>
Eigen::VectorXd rk4_step(Derivative&& f, double t, const Eigen::VectorXd& x, double dt) {
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + 0.5 * dt, (x + 0.5 * dt * k1).eval());
    const Eigen::VectorXd k3 = f(t + 0.5 * dt, (x + 0.5 * dt * k2).eval());
    const Eigen::VectorXd k4 = f(t + dt, (x + dt * k3).eval());
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct StepResult {
    Eigen::VectorXd next_state;
    Eigen::VectorXd output;  ///< C*next_state + D*input
};

/// Advances dx/dt = Ax + Bu by dt with u held constant over the step.
/// Throws std::invalid_argument for dt <= 0, dimension mismatch or
/// non-finite state/input.
StepResult step_rk4(const StateSpaceModel& model, const Eigen::VectorXd& state,
                    const Eigen::VectorXd& input, double dt);

/// min(nonzero time constants)/20, capped at 0.01 s.
double default_time_step(std::span<const double> time_constants);

}  // namespace gridflex::linsys
