#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "gridflex/grid.hpp"

using namespace gridflex;
using namespace gridflex::grid;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

void require_poly(const linsys::Polynomial& got, const linsys::Polynomial& want, double tol = 1e-14) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK_THAT(got[i], WithinAbs(want[i], tol));
}

// Steady state of the linear droop loop from the DC balance
// D*dw + dw/R = -dPD + P_anc + dPC, derived by hand.
double droop_steady_state(const GridParameters& p, double dPD) {
    return -dPD / (p.D + 1.0 / p.R);
}

// Steady state with the saturated proportional controller: solve the
// unclipped balance, then clip and re-solve.
double ancillary_steady_state(const GridParameters& p, double dPD) {
    const double unclipped = -dPD / (p.D + 1.0 / p.R + p.Kp);
    const double command = -p.Kp * unclipped;
    if (command > p.anc_max) return -(dPD - p.anc_max) / (p.D + 1.0 / p.R);
    if (command < p.anc_min) return -(dPD - p.anc_min) / (p.D + 1.0 / p.R);
    return unclipped;
}

// Hand-rolled final-value evaluation of the state-space DC gain: x_ss = -A^-1 B u.
Eigen::VectorXd dc_output(const linsys::StateSpaceModel& m, const Eigen::VectorXd& u) {
    const Eigen::VectorXd x = -m.A.fullPivLu().solve(m.B * u);
    return m.C * x + m.D * u;
}

}  // namespace

TEST_CASE("parameter validation") {
    GridParameters p;
    CHECK_NOTHROW(p.validate());
    auto bad = [](auto mutate) {
        GridParameters q;
        mutate(q);
        return q;
    };
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.M = 0.0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.M_base = 0.0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.D = -1.0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.R = 0.0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.T5 = -0.1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.Kp = -1.0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.anc_min = 0.1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.anc_max = -0.1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](GridParameters& q) { q.K2 = 0.5; }).validate(), std::invalid_argument);
    CHECK_NOTHROW(bad([](GridParameters& q) { q.R = std::numeric_limits<double>::infinity(); }).validate());
}

TEST_CASE("governor") {
    SECTION("reference parameters") {
        GridParameters p;
        auto g = governor_tf(p);
        require_poly(g.num(), {1.0});
        require_poly(g.den(), {1.0, 0.2, 0.01});
    }
    SECTION("all zero time constants") {
        GridParameters p;
        p.T1 = p.T2 = p.T3 = 0.0;
        auto g = governor_tf(p);
        require_poly(g.num(), {1.0});
        require_poly(g.den(), {1.0});
    }
    SECTION("electro-hydraulic with lead") {
        GridParameters p;
        p.T1 = 2.8;
        p.T2 = 1.0;
        p.T3 = 0.15;
        CHECK_THAT(governor_tf(p).dc_gain(), WithinAbs(1.0, 1e-15));
    }
}

TEST_CASE("turbine") {
    SECTION("non-reheat") {
        GridParameters p;
        auto g = turbine_tf(p);
        require_poly(g.num(), {1.0});
        require_poly(g.den(), {1.0, 1.0});
    }
    SECTION("equal fractions, no lags") {
        GridParameters p;
        p.K1 = p.K2 = p.K3 = p.K4 = 0.25;
        p.T4 = 0.0;
        auto g = turbine_tf(p);
        CHECK_THAT(g.dc_gain(), WithinAbs(1.0, 1e-15));
        for (double w : {0.01, 1.0, 100.0}) CHECK(std::abs(g.evaluate({0.0, w}) - 1.0) < 1e-14);
    }
    SECTION("two stages by hand") {
        GridParameters p;
        p.K1 = 0.3;
        p.K2 = 0.7;
        p.T4 = 1.0;
        p.T5 = 2.0;
        auto g = turbine_tf(p);
        require_poly(g.num(), {1.0, 0.6});
        require_poly(g.den(), {1.0, 3.0, 2.0});
    }
    SECTION("four-stage form matches the expanded weighted sum") {
        GridParameters p;
        p.K1 = 0.1;
        p.K2 = 0.2;
        p.K3 = 0.3;
        p.K4 = 0.4;
        p.T4 = 0.3;
        p.T5 = 0.5;
        p.T6 = 7.0;
        p.T7 = 0.4;
        auto g = turbine_tf(p);
        for (double w : {0.001, 0.1, 1.0, 10.0}) {
            const std::complex<double> s{0.0, w};
            const auto F = [&](double T) { return 1.0 / (1.0 + s * T); };
            const auto want = p.K1 * F(p.T4) + p.K2 * F(p.T4) * F(p.T5) + p.K3 * F(p.T4) * F(p.T5) * F(p.T6) +
                              p.K4 * F(p.T4) * F(p.T5) * F(p.T6) * F(p.T7);
            CHECK(std::abs(g.evaluate(s) - want) < 1e-13);
        }
        CHECK_THAT(g.dc_gain(), WithinAbs(p.K1 + p.K2 + p.K3 + p.K4, 4 * std::numeric_limits<double>::epsilon()));
    }
}

TEST_CASE("generator") {
    GridParameters p;
    CHECK_THAT(generator_tf(p).dc_gain(), WithinRel(1.0 / 0.0265, 1e-15));
    CHECK_THAT(generator_tf(p).dc_gain(), WithinAbs(37.7358, 1e-4));
    p.D = 1.0;
    p.M = 1.0;
    require_poly(generator_tf(p).den(), {1.0, 1.0});
    p.D = 0.0;
    p.M = 2.0;
    require_poly(generator_tf(p).den(), {0.0, 2.0});
    p.M = 132.6;
    p.M_base = 100.0;
    CHECK_THAT(generator_tf(p).den()[1], WithinRel(1.326, 1e-15));
}

TEST_CASE("inertia base decides closed-loop stability") {
    auto max_real = [](double base) {
        GridParameters p;
        p.M_base = base;
        const auto loop = build_closed_loop(p);
        return Eigen::EigenSolver<Eigen::MatrixXd>(loop.model.A).eigenvalues().real().maxCoeff();
    };
    // slowest mode of the droop loop with M used as given
    CHECK_THAT(max_real(1.0), WithinAbs(-0.19513, 1e-4));
    CHECK(max_real(100.0) > 0.5);
}

TEST_CASE("ancillary controller") {
    GridParameters p;
    SECTION("examples") {
        CHECK(ancillary_power(1.0, p) == 0.0);
        p.anc_min = -0.6;
        CHECK_THAT(ancillary_power(1.005, p), WithinAbs(-0.225, 1e-12));
        p.anc_max = 0.3;
        CHECK(ancillary_power(0.98, p) == 0.3);
    }
    SECTION("bounds, monotonicity and odd symmetry (property)") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> dw(-0.05, 0.05);
        std::uniform_real_distribution<double> bound(0.0, 1.0);
        for (int i = 0; i < 2000; ++i) {
            GridParameters q;
            q.anc_min = -bound(rng);
            q.anc_max = bound(rng);
            const double x = dw(rng);
            const double y = dw(rng);
            const double fx = ancillary_power(1.0 + x, q);
            CHECK(fx >= q.anc_min);
            CHECK(fx <= q.anc_max);
            if (x <= y) CHECK(fx >= ancillary_power(1.0 + y, q));
            // odd before clipping; 1 +- x rounds, hence the tolerance
            q.anc_min = -1e9;
            q.anc_max = 1e9;
            CHECK_THAT(ancillary_power(1.0 + x, q), WithinAbs(-ancillary_power(1.0 - x, q), 1e-12));
        }
    }
}

TEST_CASE("AGC integrator") {
    GridParameters p;
    p.agc_enabled = true;
    p.agc_gain = 1.0;
    SECTION("no error, no signal") {
        std::vector<double> w(1000, 1.0);
        CHECK(agc_signal(w, p, 0.01) == 0.0);
    }
    SECTION("integral of a constant deviation") {
        // samples at t = 0, 0.01, ..., 10
        std::vector<double> w(1001, 0.99);
        CHECK_THAT(agc_signal(w, p, 0.01), WithinAbs(0.1, 1e-12));
    }
    SECTION("trapezoid on a ramp is exact") {
        AgcIntegrator agc(2.0);
        double out = 0.0;
        for (int k = 0; k <= 100; ++k) out = agc.update(1.0 + 0.001 * k * 0.1, 1.0, 0.1);
        // -2 * integral of 0.001 t over [0, 10]
        CHECK_THAT(out, WithinAbs(-2.0 * 0.001 * 50.0, 1e-12));
    }
    SECTION("disabled") {
        p.agc_enabled = false;
        std::vector<double> w(10, 0.9);
        CHECK(agc_signal(w, p, 0.1) == 0.0);
    }
}

TEST_CASE("closed loop DC behaviour") {
    GridParameters p;
    const auto loop = build_closed_loop(p);
    loop.model.validate();
    CHECK(loop.model.inputs() == 3);
    CHECK(loop.model.outputs() == 3);

    SECTION("droop steady state") {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
        u(ClosedLoop::kDisturbance) = 0.5;
        const auto y = dc_output(loop.model, u);
        CHECK_THAT(y(ClosedLoop::kOmega), WithinAbs(droop_steady_state(p, 0.5), 1e-12));
        CHECK_THAT(y(ClosedLoop::kOmega), WithinAbs(-0.024967, 5e-7));
        // valve and mechanical power pick up -dw/R
        CHECK_THAT(y(ClosedLoop::kMechanical), WithinAbs(-y(ClosedLoop::kOmega) / p.R, 1e-12));
        CHECK_THAT(y(ClosedLoop::kValve), WithinAbs(-y(ClosedLoop::kOmega) / p.R, 1e-12));
    }
    SECTION("ancillary and speed-changer inputs enter with the opposite sign to load") {
        for (auto idx : {ClosedLoop::kAncillary, ClosedLoop::kSpeedChanger}) {
            Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
            u(idx) = 0.2;
            CHECK_THAT(dc_output(loop.model, u)(ClosedLoop::kOmega), WithinAbs(-droop_steady_state(p, 0.2), 1e-12));
        }
    }
    SECTION("without droop the damping alone sets the offset") {
        GridParameters q;
        q.R = std::numeric_limits<double>::infinity();
        const auto open = build_closed_loop(q);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
        u(ClosedLoop::kDisturbance) = 0.5;
        CHECK_THAT(dc_output(open.model, u)(ClosedLoop::kOmega), WithinAbs(-0.5 / 0.0265, 1e-9));
        CHECK_THAT(dc_output(open.model, u)(ClosedLoop::kOmega), WithinAbs(-18.868, 1e-3));
    }
    SECTION("equilibrium at zero input") {
        auto r = linsys::step_rk4(loop.model, Eigen::VectorXd::Zero(loop.model.states()), Eigen::VectorXd::Zero(3),
                                  0.005);
        CHECK(r.next_state.isZero(0.0));
        CHECK(r.output.isZero(0.0));
    }
    SECTION("closed-form clipped steady states") {
        // reference figures are quoted to four significant digits
        GridParameters q;
        q.anc_min = -0.3;
        q.anc_max = 0.3;
        CHECK_THAT(ancillary_steady_state(q, 0.5), WithinAbs(-0.009987, 5e-6));
        q.anc_min = -0.6;
        q.anc_max = 0.6;
        CHECK_THAT(ancillary_steady_state(q, 0.5), WithinAbs(-0.007688, 5e-6));
    }
}

TEST_CASE("state-space loop matches the composed disturbance transfer function") {
    // Route 1: block-by-block state-space wiring. Route 2: transfer-function
    // algebra on the same blocks. They must agree across frequency.
    std::vector<GridParameters> cases(3);
    cases[1].T2 = 0.05;
    cases[1].T1 = 0.3;
    cases[2].K1 = 0.3;
    cases[2].K2 = 0.4;
    cases[2].K3 = 0.3;
    cases[2].T5 = 0.5;
    cases[2].T6 = 6.0;
    for (const auto& p : cases) {
        const auto loop = build_closed_loop(p);
        const auto tf = disturbance_tf(p);
        for (int i = 0; i < 20; ++i) {
            const std::complex<double> s{0.0, 1e-3 * std::pow(1e6, i / 19.0)};
            const auto a = linsys::frequency_response(loop.model, s, ClosedLoop::kOmega, ClosedLoop::kDisturbance);
            const auto b = tf.evaluate(s);
            CHECK(std::abs(a - b) <= 1e-9 * std::abs(b));
        }
    }
}
