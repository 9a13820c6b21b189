#include "gridflex/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gridflex/config.hpp"
#include "gridflex/csv.hpp"
#include "gridflex/flex.hpp"
#include "gridflex/sim.hpp"
#include "gridflex/sysid.hpp"

namespace gridflex::cli {

namespace fs = std::filesystem;

namespace {

// Usage or input errors that are not tied to a config line.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Manifest {
    std::string subcommand;
    YAML::Node config;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> options;
    std::vector<std::string> outputs;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError(fmt::format("cannot write '{}'", path.string()));
    f << text;
    if (!f) throw UsageError(fmt::format("failed writing '{}'", path.string()));
}

void write_manifest(const fs::path& path, const Manifest& m) {
    YAML::Node root;
    root["tool"] = "gridflex";
    root["version"] = kToolVersion;
    root["subcommand"] = m.subcommand;
    YAML::Node inputs(YAML::NodeType::Map);
    for (const auto& [k, v] : m.inputs) inputs[k] = v;
    root["inputs"] = inputs;
    YAML::Node options(YAML::NodeType::Map);
    for (const auto& [k, v] : m.options) options[k] = v;
    root["options"] = options;
    YAML::Node outputs(YAML::NodeType::Sequence);
    for (const auto& o : m.outputs) outputs.push_back(o);
    root["outputs"] = outputs;
    root["config"] = m.config;
    write_text(path, config::emit(root));
}

std::string absolute_string(const fs::path& p) {
    return fs::absolute(p).lexically_normal().string();
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
    return file.parent_path() / (file.stem().string() + suffix);
}

// --- simulate --------------------------------------------------------------

int simulate(config::SimulationConfig cfg, std::optional<double> dt_override, const fs::path& out_dir,
             Manifest manifest, std::ostream& out, std::ostream& err) {
    if (dt_override) {
        for (auto& sc : cfg.scenarios) {
            sc.dt = *dt_override;
            try {
                sc.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(fmt::format("--dt-override: scenario '{}': {}", sc.label, e.what()));
            }
        }
    }

    const std::vector<sim::Trajectory> runs = sim::run_scenarios(cfg.scenarios);
    fs::create_directories(out_dir);

    manifest.subcommand = "simulate";
    manifest.config = config::to_yaml(cfg);
    bool aborted = false;
    for (const auto& tr : runs) {
        std::ostringstream csv_text;
        csv::write_trajectory(csv_text, tr);
        const std::string name = tr.label + ".csv";
        write_text(out_dir / name, csv_text.str());
        manifest.outputs.push_back(name);
        if (tr.aborted) {
            aborted = true;
            err << "scenario '" << tr.label << "' aborted: " << tr.diagnostic << '\n';
        }
    }

    if (!aborted && runs.size() >= 2) {
        const sim::Comparison cmp = sim::compare_trajectories(runs);
        std::ostringstream cmp_text;
        csv::write_comparison(cmp_text, cmp);
        write_text(out_dir / "comparison.csv", cmp_text.str());
        manifest.outputs.push_back("comparison.csv");

        out << fmt::format("{:<24} {:>14} {:>14} {:>14}\n", "scenario", "max|domega|", "int|domega|dt", "anc energy");
        for (const auto& r : cmp.rows) {
            out << fmt::format("{:<24} {:>14.6e} {:>14.6e} {:>14.6e}\n", r.label, r.summary.max_abs_domega,
                               r.summary.integral_abs_domega, r.summary.ancillary_energy);
        }
        out << "order by max|domega| (best first):";
        for (const auto& l : cmp.order_by_max) out << ' ' << l;
        out << "\norder by int|domega|dt (best first):";
        for (const auto& l : cmp.order_by_integral) out << ' ' << l;
        out << '\n';
        out << "max|domega| strictly decreasing in listed order: " << (cmp.max_strictly_decreasing ? "yes" : "no")
            << '\n';
    } else if (!aborted) {
        const auto& s = runs.front().summary;
        out << fmt::format("{}: max|domega| = {:.6e}, int|domega|dt = {:.6e}\n", runs.front().label,
                           s.max_abs_domega, s.integral_abs_domega);
    }

    write_manifest(out_dir / "manifest.yaml", manifest);
    return aborted ? kNumericalAbort : kOk;
}

// --- identify --------------------------------------------------------------

std::optional<sysid::ArxOrders> parse_orders(const std::string& text) {
    if (text == "auto") return std::nullopt;
    sysid::ArxOrders o;
    char c1 = 0;
    char c2 = 0;
    std::istringstream ss(text);
    if (!(ss >> o.na >> c1 >> o.nb >> c2 >> o.nk) || c1 != ',' || c2 != ',' || !ss.eof()) {
        throw UsageError(fmt::format("--orders must be 'auto' or 'na,nb,nk' (got '{}')", text));
    }
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--orders: ") + e.what());
    }
    return o;
}

std::string identification_report(const sysid::IdentificationResult& r, const sysid::IoRecord& data,
                                   bool auto_orders) {
    const auto& m = r.model;
    std::ostringstream os;
    os << "ARX identification report\n";
    os << fmt::format("samples            {} (estimation {}, validation tail {})\n", data.size(),
                      r.estimation_samples, r.validation_samples);
    os << fmt::format("sample period      {} s\n", m.sample_period);
    os << fmt::format("orders             na={} nb={} nk={}{}\n", m.orders.na, m.orders.nb, m.orders.nk,
                      auto_orders ? fmt::format(" (selected from {} candidates)", r.candidates.size()) : "");
    for (int i = 0; i < m.orders.na; ++i) os << fmt::format("a{:<17} {:.17g}\n", i + 1, m.a()[static_cast<std::size_t>(i)]);
    for (int j = 0; j < m.orders.nb; ++j) os << fmt::format("b{:<17} {:.17g}\n", j + 1, m.b()[static_cast<std::size_t>(j)]);
    os << fmt::format("operating point    u={:.17g} y={:.17g}\n", m.u_offset, m.y_offset);
    try {
        os << fmt::format("static gain        {:.6g}\n", m.static_gain());
    } catch (const std::domain_error&) {
        os << "static gain        undefined (unit root)\n";
    }
    os << fmt::format("regressor rank     {} / {} (with intercept)\n", r.diagnostics.rank,
                      m.orders.parameter_count() + 1);
    os << fmt::format("residual RMS       {:.6g} (estimation, one step)\n", r.diagnostics.residual_rms);
    os << fmt::format("fit, free run      {:.3f} % (validation tail)\n", r.validation_fit_free_run);
    os << fmt::format("fit, one step      {:.3f} % (validation tail)\n", r.validation_fit_one_step);
    if (auto_orders) {
        os << "\ncandidates (free-run validation fit %)\n";
        for (const auto& c : r.candidates) {
            if (std::isnan(c.validation_fit)) {
                os << fmt::format("  {},{},{}  failed: {}\n", c.orders.na, c.orders.nb, c.orders.nk, c.note);
            } else {
                os << fmt::format("  {},{},{}  {:.3f}\n", c.orders.na, c.orders.nb, c.orders.nk, c.validation_fit);
            }
        }
    }
    return os.str();
}

int identify(const sysid::IoRecord& data, const std::string& orders_text, const fs::path& out_path,
             Manifest manifest, std::ostream& out) {
    const std::optional<sysid::ArxOrders> orders = parse_orders(orders_text);
    const sysid::IdentificationResult result = sysid::identify(data, orders);

    const std::string report = identification_report(result, data, !orders.has_value());
    write_text(out_path, config::emit(config::to_yaml(result.model)));
    const fs::path report_path = sibling(out_path, "_report.txt");
    write_text(report_path, report);
    out << report;

    manifest.subcommand = "identify";
    manifest.options["orders"] = orders_text;
    manifest.config = YAML::Node(YAML::NodeType::Map);
    manifest.outputs = {out_path.filename().string(), report_path.filename().string()};
    write_manifest(sibling(out_path, "_manifest.yaml"), manifest);
    return kOk;
}

sysid::IoRecord load_identify_data(const Manifest& m) {
    if (m.inputs.contains("data")) return csv::read_io_record(m.inputs.at("data"));
    if (m.inputs.contains("input") && m.inputs.contains("output")) {
        return csv::read_io_record(m.inputs.at("input"), m.inputs.at("output"));
    }
    throw UsageError("identify needs --data, or both --input and --output");
}

// --- gen-fixture -----------------------------------------------------------

int gen_fixture(const sysid::FanFixtureConfig& cfg, const fs::path& out_path, Manifest manifest, std::ostream& out) {
    const sysid::IoRecord rec = sysid::generate_fan_fixture(cfg);
    std::ostringstream text;
    csv::write_io_record(text, rec);
    write_text(out_path, text.str());

    out << fmt::format("wrote {} samples, {} set-point edges, to {}\n", rec.size(),
                       sysid::count_switching_edges(rec.u), out_path.string());

    manifest.subcommand = "gen-fixture";
    manifest.options["seed"] = std::to_string(cfg.seed);
    manifest.config = config::to_yaml(cfg);
    manifest.outputs = {out_path.filename().string()};
    write_manifest(sibling(out_path, "_manifest.yaml"), manifest);
    return kOk;
}

// --- estimate --------------------------------------------------------------

int estimate(const config::FleetConfig& cfg, const std::optional<fs::path>& out_dir, Manifest manifest,
             std::ostream& out) {
    std::ostringstream text;
    std::ostringstream table;
    table << "label,building_swing_kw,building_floor_area_ft2,national_floor_area_ft2,vfd_fraction,"
             "density_w_per_ft2,capacity_gw,reference_gw,reference_minus_computed_gw\n";

    const double density = flex::flexibility_density(cfg.building);
    text << "Fleet flexibility estimate\n";
    text << fmt::format("flexibility density  {:.5f} W/ft2 ({} kW over {} ft2, response time {} s)\n", density,
                        cfg.building.per_building_swing_kw, cfg.building.building_floor_area_ft2,
                        cfg.building.response_time_s);
    if (cfg.fan_nominal_kw && cfg.fan_swing_kw) {
        text << fmt::format("fan swing fraction   {:.2f} % ({} kW of {} kW nominal)\n",
                            flex::swing_fraction(*cfg.fan_nominal_kw, *cfg.fan_swing_kw), *cfg.fan_swing_kw,
                            *cfg.fan_nominal_kw);
    }
    for (const auto& stock : cfg.stock) {
        flex::FleetAssumptions a = cfg.building;
        a.national_floor_area_ft2 = stock.floor_area_ft2;
        const flex::CapacityEstimate est = flex::national_capacity(a);
        text << fmt::format("[{}] {:.4g} ft2 x {} VFD fraction -> {:.3f} GW", stock.label, stock.floor_area_ft2,
                            a.vfd_fraction, est.capacity_gw);
        table << stock.label << ',' << csv::format_double(a.per_building_swing_kw) << ','
              << csv::format_double(a.building_floor_area_ft2) << ',' << csv::format_double(a.national_floor_area_ft2)
              << ',' << csv::format_double(a.vfd_fraction) << ',' << csv::format_double(est.density_w_per_ft2) << ','
              << csv::format_double(est.capacity_gw) << ',';
        if (stock.reference_gw) {
            const double gap = *stock.reference_gw - est.capacity_gw;
            text << fmt::format("; reference figure {} GW", *stock.reference_gw);
            if (std::abs(gap) > 0.005 * std::abs(*stock.reference_gw)) {
                text << fmt::format(" (differs by {:+.3f} GW, {:+.1f} %; not reproduced by these inputs)", gap,
                                    100.0 * gap / est.capacity_gw);
            }
            table << csv::format_double(*stock.reference_gw) << ',' << csv::format_double(gap) << '\n';
        } else {
            table << ",\n";
        }
        text << '\n';
    }
    out << text.str();

    if (out_dir) {
        write_text(*out_dir / "capacity.txt", text.str());
        write_text(*out_dir / "capacity.csv", table.str());
        manifest.subcommand = "estimate";
        manifest.config = config::to_yaml(cfg);
        manifest.outputs = {"capacity.txt", "capacity.csv"};
        write_manifest(*out_dir / "manifest.yaml", manifest);
    }
    return kOk;
}

// --- analyze-dr ------------------------------------------------------------

flex::Window parse_window_flag(const std::string& flag, const std::string& text) {
    flex::Window w;
    char comma = 0;
    std::istringstream ss(text);
    if (!(ss >> w.start >> comma >> w.end) || comma != ',' || !ss.eof()) {
        throw UsageError(fmt::format("{} must be 'start,end' in epoch seconds (got '{}')", flag, text));
    }
    if (!(w.end > w.start)) throw UsageError(fmt::format("{} needs end > start", flag));
    return w;
}

int analyze_dr(const flex::TimeSeries& series, const config::DrWindows& windows, const std::optional<fs::path>& out_dir,
               Manifest manifest, std::ostream& out) {
    flex::DrEvent event{series, windows.event, windows.baseline};
    const flex::DrReport r = flex::analyze_dr_event(event);

    std::ostringstream text;
    text << "Demand-response event report\n";
    text << fmt::format("baseline window   [{}, {}) s, {} samples, mean {:.3f} kW\n", r.baseline.start, r.baseline.end,
                        r.baseline_samples, r.baseline_mean_kw);
    text << fmt::format("event window      [{}, {}) s, {} samples, mean {:.3f} kW\n", r.event.start, r.event.end,
                        r.event_samples, r.event_mean_kw);
    text << fmt::format("drop              {:.3f} kW ({:.2f} %)\n", r.drop_kw, r.drop_percent);
    text << fmt::format("energy saved      {:.3f} kWh over {:.2f} h\n", r.energy_saved_kwh,
                        r.event.duration_s() / 3600.0);
    out << text.str();

    if (out_dir) {
        std::ostringstream table;
        csv::write_dr_report(table, r);
        write_text(*out_dir / "dr_report.txt", text.str());
        write_text(*out_dir / "dr_report.csv", table.str());
        manifest.subcommand = "analyze-dr";
        manifest.config = config::to_yaml(windows);
        manifest.outputs = {"dr_report.txt", "dr_report.csv"};
        write_manifest(*out_dir / "manifest.yaml", manifest);
    }
    return kOk;
}

// --- replay ----------------------------------------------------------------

int replay(const fs::path& manifest_path, const fs::path& out, std::ostream& os, std::ostream& err) {
    const YAML::Node root = config::load_yaml(manifest_path);
    const std::string source = manifest_path.string();
    if (!root.IsMap() || !root["subcommand"] || !root["config"]) {
        throw config::ConfigError(source, 0, "not a gridflex run manifest");
    }
    Manifest m;
    for (const auto& kv : root["inputs"]) m.inputs[kv.first.as<std::string>()] = kv.second.as<std::string>();
    for (const auto& kv : root["options"]) m.options[kv.first.as<std::string>()] = kv.second.as<std::string>();
    const auto sub = root["subcommand"].as<std::string>();
    const YAML::Node cfg = root["config"];

    if (sub == "simulate") {
        return simulate(config::parse_simulation_config(cfg, source, manifest_path.parent_path()), std::nullopt, out,
                        m, os, err);
    }
    if (sub == "identify") return identify(load_identify_data(m), m.options.at("orders"), out, m, os);
    if (sub == "gen-fixture") return gen_fixture(config::parse_fixture_config(cfg, source), out, m, os);
    if (sub == "estimate") return estimate(config::parse_fleet_config(cfg, source), out, m, os);
    if (sub == "analyze-dr") {
        return analyze_dr(csv::read_power_series(m.inputs.at("data")), config::parse_dr_windows(cfg, source), out, m,
                          os);
    }
    throw config::ConfigError(source, 0, fmt::format("unknown subcommand '{}' in manifest", sub));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grid frequency regulation with building fan ancillary service"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::optional<double> dt_override;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the scenarios of a scenario file");
    sim_cmd->add_option("--config", config_path, "Scenario file")->required();
    sim_cmd->add_option("--out", out_path, "Output directory")->required();
    sim_cmd->add_option("--dt-override", dt_override, "Replace the integration step of every scenario");

    std::string data_path;
    std::string input_path;
    std::string output_path;
    std::string orders = "auto";
    auto* id_cmd = app.add_subcommand("identify", "Fit an ARX fan model to set-point/power data");
    auto* data_opt = id_cmd->add_option("--data", data_path, "CSV with timestamp,u,y");
    auto* in_opt = id_cmd->add_option("--input", input_path, "CSV with timestamp,u");
    auto* outsig_opt = id_cmd->add_option("--output", output_path, "CSV with timestamp,y");
    in_opt->needs(outsig_opt)->excludes(data_opt);
    outsig_opt->needs(in_opt)->excludes(data_opt);
    id_cmd->add_option("--orders", orders, "'auto' or na,nb,nk");
    id_cmd->add_option("--out", out_path, "Model file to write")->required();

    std::optional<std::uint64_t> seed;
    auto* fx_cmd = app.add_subcommand("gen-fixture", "Generate a synthetic fan experiment record");
    fx_cmd->add_option("--config", config_path, "Fixture settings file");
    fx_cmd->add_option("--seed", seed, "Noise seed (overrides the settings file)");
    fx_cmd->add_option("--out", out_path, "CSV to write")->required();

    auto* est_cmd = app.add_subcommand("estimate", "National fan-flexibility capacity estimate");
    est_cmd->add_option("--config", config_path, "Fleet assumptions file")->required();
    est_cmd->add_option("--out", out_path, "Output directory");

    std::string event_text;
    std::string baseline_text;
    auto* dr_cmd = app.add_subcommand("analyze-dr", "Demand-response event statistics from fan power telemetry");
    dr_cmd->add_option("--data", data_path, "CSV with timestamp,kW")->required();
    auto* dr_cfg = dr_cmd->add_option("--config", config_path, "Window file");
    auto* ev_opt = dr_cmd->add_option("--event", event_text, "Event window start,end (epoch s)");
    auto* bl_opt = dr_cmd->add_option("--baseline", baseline_text, "Baseline window start,end (epoch s)");
    ev_opt->excludes(dr_cfg);
    bl_opt->excludes(dr_cfg);
    dr_cmd->add_option("--out", out_path, "Output directory");

    std::string manifest_path;
    auto* rp_cmd = app.add_subcommand("replay", "Re-run a recorded manifest");
    rp_cmd->add_option("--manifest", manifest_path, "manifest written by a previous run")->required();
    rp_cmd->add_option("--out", out_path, "Output directory or file, as for the original subcommand")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageOrConfig;
    }

    const auto optional_dir = [&]() -> std::optional<fs::path> {
        if (out_path.empty()) return std::nullopt;
        return fs::path(out_path);
    };

    try {
        Manifest m;
        if (sim_cmd->parsed()) {
            m.inputs["config"] = absolute_string(config_path);
            if (dt_override) m.options["dt_override"] = csv::format_double(*dt_override);
            return simulate(config::load_simulation_config(config_path), dt_override, out_path, m, out, err);
        }
        if (id_cmd->parsed()) {
            if (!data_path.empty()) {
                m.inputs["data"] = absolute_string(data_path);
            } else if (!input_path.empty()) {
                m.inputs["input"] = absolute_string(input_path);
                m.inputs["output"] = absolute_string(output_path);
            }
            return identify(load_identify_data(m), orders, out_path, m, out);
        }
        if (fx_cmd->parsed()) {
            sysid::FanFixtureConfig cfg;
            if (!config_path.empty()) {
                m.inputs["config"] = absolute_string(config_path);
                cfg = config::parse_fixture_config(config::load_yaml(config_path), config_path);
            }
            if (seed) cfg.seed = *seed;
            return gen_fixture(cfg, out_path, m, out);
        }
        if (est_cmd->parsed()) {
            m.inputs["config"] = absolute_string(config_path);
            return estimate(config::parse_fleet_config(config::load_yaml(config_path), config_path), optional_dir(), m,
                            out);
        }
        if (dr_cmd->parsed()) {
            m.inputs["data"] = absolute_string(data_path);
            config::DrWindows windows;
            if (!config_path.empty()) {
                m.inputs["config"] = absolute_string(config_path);
                windows = config::parse_dr_windows(config::load_yaml(config_path), config_path);
            } else {
                if (event_text.empty()) throw UsageError("analyze-dr needs --config or --event");
                windows.event = parse_window_flag("--event", event_text);
                if (!baseline_text.empty()) windows.baseline = parse_window_flag("--baseline", baseline_text);
            }
            return analyze_dr(csv::read_power_series(data_path), windows, optional_dir(), m, out);
        }
        if (rp_cmd->parsed()) return replay(manifest_path, out_path, out, err);
    } catch (const sysid::ExcitationError& e) {
        err << "error: " << e.what() << '\n';
        return kExcitation;
    } catch (const NumericalAbort& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalAbort;
    } catch (const config::ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsageOrConfig;
    } catch (const csv::CsvError& e) {
        err << "data error: " << e.what() << '\n';
        return kUsageOrConfig;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageOrConfig;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsageOrConfig;
    } catch (const std::out_of_range& e) {
        err << "error: incomplete manifest (" << e.what() << ")\n";
        return kUsageOrConfig;
    } catch (const YAML::Exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageOrConfig;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsageOrConfig;
    }
    return kUsageOrConfig;
}

}  // namespace gridflex::cli
