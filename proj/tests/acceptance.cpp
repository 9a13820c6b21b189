// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all criteria
//   acceptance --only N   run criterion N alone
// Exit status is non-zero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "arx_oracle.hpp"
#include "gridflex/cli.hpp"
#include "gridflex/config.hpp"
#include "gridflex/flex.hpp"
#include "gridflex/linsys.hpp"
#include "gridflex/sim.hpp"
#include "gridflex/sysid.hpp"

namespace fs = std::filesystem;
using namespace gridflex;

namespace {

const fs::path kConfigs = fs::path(GRIDFLEX_SOURCE_DIR) / "configs";

struct Outcome {
    bool pass = true;
    std::string detail;
    std::vector<std::string> notes;  // informational, printed under the result line

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Reference plant parameters written out independently of the library defaults.
constexpr double kD = 0.0265;
constexpr double kR = 0.05;
constexpr double kKp = 45.0;

sim::Scenario reference_case(const std::string& label, sim::AncillaryMode mode, double bound) {
    sim::Scenario s;
    s.label = label;
    s.grid.M = 132.6;
    s.grid.D = kD;
    s.grid.T1 = 0.1;
    s.grid.T2 = 0.0;
    s.grid.T3 = 0.1;
    s.grid.T4 = 1.0;
    s.grid.K1 = 1.0;
    s.grid.R = kR;
    s.grid.Kp = kKp;
    s.grid.anc_min = -bound;
    s.grid.anc_max = bound;
    s.grid.agc_enabled = false;
    s.ancillary.mode = mode;
    s.schedule.pulses = {{10.0, 20.0, 0.5}};
    s.horizon = 50.0;
    s.dt = 0.005;
    return s;
}

// Deviation at the last recorded sample strictly before t.
double deviation_before(const sim::Trajectory& tr, double t) {
    double v = NAN;
    for (std::size_t k = 0; k < tr.time.size() && tr.time[k] < t - 1e-9; ++k) v = tr.samples[k].omega - tr.omega_des;
    return v;
}

// Same loop with the pulse held indefinitely; the value it settles to.
double held_steady_state(sim::Scenario s) {
    s.schedule.pulses = {{10.0, 1e9, 0.5}};
    s.horizon = 200.0;
    const auto tr = sim::run_scenario(s);
    return tr.samples.back().omega - tr.omega_des;
}

Outcome plateau_check(const std::string& label, sim::AncillaryMode mode, double bound, double closed_form,
                      double reference) {
    Outcome o;
    Stopwatch clock;
    const auto tr = sim::run_scenario(reference_case(label, mode, bound));
    const double elapsed = clock.seconds();
    const double plateau = deviation_before(tr, 20.0);
    o.require(std::abs(plateau - reference) <= 1e-4,
              fmt::format("{}: plateau {:.6f} vs {:.6f} (|err| {:.2e}, tol 1e-4)", label, plateau, reference,
                          std::abs(plateau - reference)));
    o.require(std::abs(closed_form - reference) <= 5e-6,
              fmt::format("closed form {:.7f}", closed_form));
    o.require(elapsed < 1.0, fmt::format("{:.3f} s", elapsed));
    const double held = held_steady_state(reference_case(label, mode, bound));
    o.notes.push_back(fmt::format("{}: with the step held, the loop settles at {:.7f} (|err| {:.1e}); the 10 s "
                                  "pulse ends while the slowest closed-loop mode has ~{:.0f}% of its amplitude left",
                                  label, held, std::abs(held - closed_form),
                                  100.0 * std::abs((plateau - held) / held)));
    return o;
}

Outcome criterion1() {
    const double closed_form = -0.5 / (kD + 1.0 / kR);
    return plateau_check("no ancillary", sim::AncillaryMode::off, 0.3, closed_form, -0.024967);
}

Outcome criterion2() {
    const double saturated = -(0.5 - 0.3) / (kD + 1.0 / kR);
    const double linear = -0.5 / (kD + 1.0 / kR + kKp);
    Outcome a = plateau_check("bound 0.3", sim::AncillaryMode::ideal, 0.3, saturated, -0.009987);
    Outcome b = plateau_check("bound 0.6", sim::AncillaryMode::ideal, 0.6, linear, -0.007688);
    // unsaturated claim for the wide bound
    b.require(kKp * std::abs(linear) < 0.6, fmt::format("ancillary at rest {:.3f} < 0.6", kKp * std::abs(linear)));
    Outcome o;
    o.pass = a.pass && b.pass;
    o.detail = a.detail + " | " + b.detail;
    o.notes = a.notes;
    o.notes.insert(o.notes.end(), b.notes.begin(), b.notes.end());
    return o;
}

Outcome criterion3() {
    Outcome o;
    const auto cfg = config::load_simulation_config(kConfigs / "three_case.yaml");
    const auto runs = sim::run_scenarios(cfg.scenarios);
    std::vector<double> peak, area;
    for (const auto& tr : runs) {
        peak.push_back(tr.summary.max_abs_domega);
        // recompute the integral here rather than trusting the summary
        double integral = 0.0;
        for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k) {
            integral += 0.5 * tr.dt *
                        (std::abs(tr.samples[k].omega - tr.omega_des) + std::abs(tr.samples[k + 1].omega - tr.omega_des));
        }
        area.push_back(integral);
    }
    bool peak_dec = runs.size() == 3;
    bool area_dec = runs.size() == 3;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        peak_dec = peak_dec && peak[i] < peak[i - 1];
        area_dec = area_dec && area[i] < area[i - 1];
    }
    o.require(peak_dec, fmt::format("max|dw| {:.5f} > {:.5f} > {:.5f}", peak[0], peak[1], peak[2]));
    o.require(area_dec, fmt::format("int|dw|dt {:.4f} > {:.4f} > {:.4f}", area[0], area[1], area[2]));
    const auto cmp = sim::compare_trajectories(runs);
    o.require(cmp.max_strictly_decreasing && cmp.integral_strictly_decreasing, "comparison table agrees");
    return o;
}

Outcome criterion4() {
    Outcome o;
    Stopwatch clock;
    std::mt19937_64 rng(20240611);
    constexpr int kPlants = 64;
    double worst = 0.0;
    std::map<std::string, int> orders_seen;
    for (int trial = 0; trial < kPlants; ++trial) {
        const auto p = oracle::random_stable_plant(rng);
        orders_seen[fmt::format("{}{}{}", p.na, p.nb, p.nk)]++;
        sysid::IoRecord rec;
        rec.u = oracle::prbs(2000, static_cast<std::uint16_t>(0x4000 + 17 * trial));
        rec.y = oracle::simulate(p, rec.u);
        const auto fit = sysid::fit_arx(sysid::build_regressors(rec, {p.na, p.nb, p.nk}));
        std::vector<double> truth = p.a;
        truth.insert(truth.end(), p.b.begin(), p.b.end());
        for (std::size_t i = 0; i < truth.size(); ++i) worst = std::max(worst, std::abs(fit.model.theta[i] - truth[i]));
    }
    const double elapsed = clock.seconds();
    o.require(worst <= 1e-6, fmt::format("{} plants, worst |theta err| {:.2e} (tol 1e-6)", kPlants, worst));
    o.require(elapsed < 30.0, fmt::format("{:.2f} s", elapsed));
    o.notes.push_back(fmt::format("{} distinct (na,nb,nk) combinations exercised", orders_seen.size()));
    return o;
}

Outcome criterion5() {
    Outcome o;
    std::mt19937_64 rng(5150);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = oracle::random_stable_plant(rng);
        sysid::IoRecord rec;
        rec.u = oracle::prbs(1000, static_cast<std::uint16_t>(0x5000 + trial));
        rec.y = oracle::simulate(p, rec.u);
        const auto model = sysid::fit_arx(sysid::build_regressors(rec, {p.na, p.nb, p.nk})).model;
        const auto sim = sysid::simulate_arx(model, rec.u, rec.y);
        if (sim.truncated) {
            worst = INFINITY;
            break;
        }
        double ss = 0.0;
        for (std::size_t i = 0; i < rec.y.size(); ++i) ss += (sim.y[i] - rec.y[i]) * (sim.y[i] - rec.y[i]);
        worst = std::max(worst, std::sqrt(ss / static_cast<double>(rec.y.size())));
    }
    o.require(worst <= 1e-8, fmt::format("40 plants, worst free-run RMS {:.2e} (tol 1e-8)", worst));
    return o;
}

Outcome criterion6() {
    Outcome o;
    flex::FleetAssumptions a;
    a.per_building_swing_kw = 24.0;
    a.building_floor_area_ft2 = 141000.0;
    a.national_floor_area_ft2 = 72e9;
    a.vfd_fraction = 0.30;
    const double now = flex::national_capacity(a).capacity_gw;
    a.national_floor_area_ft2 = 103e9;
    const double later = flex::national_capacity(a).capacity_gw;
    o.require(std::abs(now - 3.677) <= 1e-3, fmt::format("current {:.4f} GW vs 3.677", now));
    o.require(std::abs(later - 5.26) <= 5e-3, fmt::format("2035 {:.4f} GW vs 5.26", later));
    o.require(now <= 4.0 && std::round(now) == 4.0, "rounds to 4 GW");

    // the report must show the computed value beside the reference one
    const auto dir = fs::temp_directory_path() / "gridflex_acceptance_c6";
    const std::string cfg = (kConfigs / "capacity.yaml").string();
    const std::string out = dir.string();
    const char* argv[] = {"gridflex", "estimate", "--config", cfg.c_str(), "--out", out.c_str()};
    std::ostringstream os, es;
    const int code = cli::run(6, argv, os, es);
    const std::string report = os.str();
    const bool noted = report.find("5.260 GW; reference figure 5.6 GW (differs by") != std::string::npos;
    o.require(code == 0 && noted, "report carries the 2035 discrepancy note");
    return o;
}

Outcome criterion7() {
    Outcome o;
    flex::TimeSeries s;
    const double t0 = 1347375600.0;
    for (int k = 0; k < 6 * 60; ++k) {
        const double t = t0 + 60.0 * k;
        s.time.push_back(t);
        s.value.push_back((t >= t0 + 7200 && t < t0 + 14400) ? 59.5 : 66.0);
    }
    const auto r = flex::analyze_dr_event({s, {t0 + 7200, t0 + 14400}, std::nullopt});
    o.require(std::abs(r.drop_kw - 6.5) <= 1e-9, fmt::format("drop {:.4f} kW", r.drop_kw));
    o.require(std::abs(r.drop_percent - 9.85) <= 5e-3, fmt::format("{:.3f}%", r.drop_percent));
    o.require(std::abs(r.drop_percent - 9.7) <= 0.3, "within 0.3 points of 9.7%");
    o.require(std::abs(r.energy_saved_kwh - 13.0) <= 1e-9, fmt::format("{:.3f} kWh", r.energy_saved_kwh));
    return o;
}

Outcome criterion8() {
    Outcome o;
    double worst = 0.0;
    for (const auto& [label, mode, bound] :
         {std::tuple{"off", sim::AncillaryMode::off, 0.3}, std::tuple{"0.3", sim::AncillaryMode::ideal, 0.3},
          std::tuple{"0.6", sim::AncillaryMode::ideal, 0.6}}) {
        auto s = reference_case(label, mode, bound);
        s.schedule.pulses.push_back({30.0, 40.0, -1.0});
        const double coarse = sim::run_scenario(s).summary.max_abs_domega;
        s.dt /= 2.0;
        const double fine = sim::run_scenario(s).summary.max_abs_domega;
        worst = std::max(worst, std::abs(coarse - fine));
    }
    o.require(worst < 1e-6, fmt::format("halving dt moves max|dw| by {:.2e} (tol 1e-6)", worst));

    double rk_err = 0.0;
    for (double a = -1.0; a <= 1.0; a += 0.25) {
        linsys::StateSpaceModel m{Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Zero(1, 1),
                                  Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Zero(1, 1)};
        const auto r = linsys::step_rk4(m, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1), 0.01);
        rk_err = std::max(rk_err, std::abs(r.next_state(0) - std::exp(a * 0.01)));
    }
    o.require(rk_err < 1e-10, fmt::format("RK4 one-step error {:.2e} (tol 1e-10)", rk_err));
    return o;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Runs every bundled config through the CLI and hashes the CSVs it writes.
std::map<std::string, std::uint64_t> run_bundle(const fs::path& root) {
    fs::remove_all(root);
    fs::create_directories(root);
    std::vector<std::vector<std::string>> jobs;
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() != ".yaml") continue;
        const auto root_node = config::load_yaml(entry.path());
        const auto stem = entry.path().stem().string();
        const auto out = (root / stem).string();
        if (root_node["scenarios"]) {
            jobs.push_back({"simulate", "--config", entry.path().string(), "--out", out});
        } else if (root_node["fixture"] || root_node["plant"]) {
            jobs.push_back({"gen-fixture", "--config", entry.path().string(), "--out", out + "/record.csv"});
            jobs.push_back({"identify", "--data", out + "/record.csv", "--out", out + "/model.yaml"});
        } else if (root_node["stock"]) {
            jobs.push_back({"estimate", "--config", entry.path().string(), "--out", out});
        } else if (root_node["event"]) {
            jobs.push_back({"analyze-dr", "--data", (kConfigs / "dr_event_power.csv").string(), "--config",
                            entry.path().string(), "--out", out});
        }
    }
    for (auto& args : jobs) {
        args.insert(args.begin(), "gridflex");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream os, es;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), os, es);
        if (code != 0) throw std::runtime_error(fmt::format("'{} {}' exited {}: {}", args[1], args[3], code, es.str()));
    }
    std::map<std::string, std::uint64_t> hashes;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.path().extension() != ".csv" && entry.path().filename() != "model.yaml") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        hashes[fs::relative(entry.path(), root).string()] = fnv1a(bytes);
    }
    return hashes;
}

Outcome criterion9() {
    Outcome o;
    const auto base = fs::temp_directory_path() / "gridflex_acceptance_c9";
    const auto first = run_bundle(base / "a");
    const auto second = run_bundle(base / "b");
    std::size_t mismatched = 0;
    for (const auto& [file, h] : first) {
        const auto it = second.find(file);
        if (it == second.end() || it->second != h) ++mismatched;
    }
    o.require(!first.empty() && first.size() == second.size() && mismatched == 0,
              fmt::format("{} output files hashed twice, {} differ", first.size(), mismatched));
    return o;
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> kCriteria = {
    {"droop steady state", criterion1},
    {"saturated and unsaturated ancillary steady states", criterion2},
    {"three-case ordering of max|dw| and int|dw|dt", criterion3},
    {"noiseless ARX identifiability", criterion4},
    {"ARX fit/simulate round trip", criterion5},
    {"national capacity arithmetic", criterion6},
    {"demand-response report", criterion7},
    {"integrator adequacy", criterion8},
    {"byte-identical outputs across runs", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }
    if (only < 0 || only > static_cast<int>(kCriteria.size())) {
        std::cerr << "no criterion " << only << '\n';
        return 2;
    }

    int failures = 0;
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (only != 0 && only != id) continue;
        Outcome o;
        try {
            o = kCriteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::cout << fmt::format("[{}] criterion {}: {} -- {}\n", o.pass ? "PASS" : "FAIL", id, kCriteria[i].first,
                                 o.detail);
        for (const auto& n : o.notes) std::cout << "       note: " << n << '\n';
    }
    return failures == 0 ? 0 : 1;
}
