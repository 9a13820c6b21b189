#include "gridflex/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gridflex::grid {

using linsys::TransferFunction;

void GridParameters::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("invalid grid parameters: ") + what);
    };
    const std::array all{M, M_base, D, T1, T2, T3, T4, T5, T6, T7, K1, K2, K3, K4, omega_des, Kp, anc_min, anc_max, agc_gain};
    require(std::all_of(all.begin(), all.end(), [](double v) { return std::isfinite(v); }),
            "all values except R must be finite");
    require(M > 0.0, "M must be > 0");
    require(M_base > 0.0, "M_base must be > 0");
    require(D >= 0.0, "D must be >= 0");
    require(R > 0.0, "R must be > 0");
    for (double t : time_constants()) require(t >= 0.0, "time constants must be >= 0");
    require(Kp >= 0.0, "Kp must be >= 0");
    require(anc_min <= 0.0, "anc_min must be <= 0");
    require(anc_max >= 0.0, "anc_max must be >= 0");
    require(agc_gain >= 0.0, "agc_gain must be >= 0");
    require(std::abs(K1 + K2 + K3 + K4 - 1.0) <= 1e-9, "turbine fractions K1..K4 must sum to 1");
}

std::vector<double> GridParameters::time_constants() const {
    return {T1, T2, T3, T4, T5, T6, T7};
}

TransferFunction governor_tf(const GridParameters& p) {
    const TransferFunction lead({1.0, p.T2}, {1.0});
    return linsys::tf_series(lead, linsys::tf_series(TransferFunction::first_order_lag(p.T1),
                                                     TransferFunction::first_order_lag(p.T3)));
}

TransferFunction turbine_tf(const GridParameters& p) {
    const std::array<double, 4> fraction{p.K1, p.K2, p.K3, p.K4};
    const std::array<double, 4> tau{p.T4, p.T5, p.T6, p.T7};

    auto is_zero = [](const TransferFunction& tf) { return tf.num().size() == 1 && tf.num().front() == 0.0; };

    // acc_i = K_i + F_{i+1} acc_{i+1}, innermost stage first.
    TransferFunction acc = TransferFunction::gain(fraction[3]);
    for (int stage = 2; stage >= 0; --stage) {
        const TransferFunction next = TransferFunction::first_order_lag(tau[static_cast<std::size_t>(stage) + 1]);
        const TransferFunction downstream =
            is_zero(acc) ? TransferFunction::gain(0.0) : linsys::tf_series(next, acc);
        const std::array terms{linsys::WeightedTerm{fraction[static_cast<std::size_t>(stage)], TransferFunction::gain(1.0)},
                               linsys::WeightedTerm{1.0, downstream}};
        acc = linsys::tf_parallel_weighted(terms);
    }
    return linsys::tf_series(TransferFunction::first_order_lag(tau[0]), acc);
}

TransferFunction generator_tf(const GridParameters& p) {
    return TransferFunction({1.0}, {p.D, p.inertia()});
}

TransferFunction disturbance_tf(const GridParameters& p) {
    const TransferFunction droop = TransferFunction::gain(1.0 / p.R);
    const TransferFunction loop =
        linsys::tf_feedback(generator_tf(p), linsys::tf_series(linsys::tf_series(governor_tf(p), turbine_tf(p)), droop));
    return linsys::tf_series(TransferFunction::gain(-1.0), loop);
}

double ancillary_power(double omega, const GridParameters& p) {
    const double command = -p.Kp * (omega - p.omega_des);
    if (omega >= p.omega_des) return std::max(command, p.anc_min);
    return std::min(command, p.anc_max);
}

double AgcIntegrator::update(double omega, double omega_des, double dt) {
    const double error = omega - omega_des;
    if (started_) integral_ += 0.5 * (previous_error_ + error) * dt;
    previous_error_ = error;
    started_ = true;
    return output();
}

double agc_signal(std::span<const double> omega_history, const GridParameters& p, double dt) {
    if (!p.agc_enabled) return 0.0;
    AgcIntegrator agc(p.agc_gain);
    for (double omega : omega_history) agc.update(omega, p.omega_des, dt);
    return agc.output();
}

ClosedLoop build_closed_loop(const GridParameters& p) {
    p.validate();
    const linsys::StateSpaceModel gov = linsys::realize(governor_tf(p));
    const linsys::StateSpaceModel tur = linsys::realize(turbine_tf(p));
    const linsys::StateSpaceModel gen = linsys::realize(generator_tf(p));

    const Eigen::Index nv = gov.states();
    const Eigen::Index nt = tur.states();
    const Eigen::Index ng = gen.states();
    const Eigen::Index n = nv + nt + ng;
    const double droop = 1.0 / p.R;
    const double dv = gov.D(0, 0);
    const double dt = tur.D(0, 0);

    // governor input  u_v = dPC - droop * Cg xg
    // valve           P_GV = Cv xv + dv u_v
    // mechanical      dPM = Ct xt + dt P_GV
    // generator input u_g = dPM - dPD + P_anc
    ClosedLoop loop;
    auto& A = loop.model.A;
    auto& B = loop.model.B;
    auto& C = loop.model.C;
    auto& D = loop.model.D;
    A = Eigen::MatrixXd::Zero(n, n);
    B = Eigen::MatrixXd::Zero(n, 3);
    C = Eigen::MatrixXd::Zero(3, n);
    D = Eigen::MatrixXd::Zero(3, 3);

    const auto iv = 0;
    const auto it = nv;
    const auto ig = nv + nt;
    const Eigen::MatrixXd omega_row = gen.C;  // 1 x ng

    A.block(iv, iv, nv, nv) = gov.A;
    A.block(iv, ig, nv, ng) = -droop * gov.B * omega_row;
    B.block(iv, ClosedLoop::kSpeedChanger, nv, 1) = gov.B;

    A.block(it, iv, nt, nv) = tur.B * gov.C;
    A.block(it, it, nt, nt) = tur.A;
    A.block(it, ig, nt, ng) = -droop * dv * tur.B * omega_row;
    B.block(it, ClosedLoop::kSpeedChanger, nt, 1) = dv * tur.B;

    A.block(ig, iv, ng, nv) = dt * gen.B * gov.C;
    A.block(ig, it, ng, nt) = gen.B * tur.C;
    A.block(ig, ig, ng, ng) = gen.A - droop * dt * dv * gen.B * omega_row;
    B.block(ig, ClosedLoop::kDisturbance, ng, 1) = -gen.B;
    B.block(ig, ClosedLoop::kSpeedChanger, ng, 1) = dt * dv * gen.B;
    B.block(ig, ClosedLoop::kAncillary, ng, 1) = gen.B;

    C.block(ClosedLoop::kOmega, ig, 1, ng) = omega_row;

    C.block(ClosedLoop::kValve, iv, 1, nv) = gov.C;
    C.block(ClosedLoop::kValve, ig, 1, ng) = -droop * dv * omega_row;
    D(ClosedLoop::kValve, ClosedLoop::kSpeedChanger) = dv;

    C.block(ClosedLoop::kMechanical, iv, 1, nv) = dt * gov.C;
    C.block(ClosedLoop::kMechanical, it, 1, nt) = tur.C;
    C.block(ClosedLoop::kMechanical, ig, 1, ng) = -droop * dt * dv * omega_row;
    D(ClosedLoop::kMechanical, ClosedLoop::kSpeedChanger) = dt * dv;

    loop.model.validate();
    return loop;
}

}  // namespace gridflex::grid
