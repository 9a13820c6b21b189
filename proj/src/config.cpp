#include "gridflex/config.hpp"

#include <set>
#include <sstream>

#include <fmt/format.h>

namespace gridflex::config {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}", source, line, message)
                                  : fmt::format("{}: {}", source, message)),
      line_(line) {}

namespace {

constexpr const char* kLabelChars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_.";

int line_of(const YAML::Node& node) {
    const auto mark = node.Mark();
    return mark.is_null() ? 0 : mark.line + 1;
}

// A YAML mapping whose keys must all be consumed.
class Section {
public:
    Section(const YAML::Node& node, std::string path, const std::string& source)
        : node_(node), path_(std::move(path)), source_(source) {
        if (!node_.IsMap()) fail(node_, fmt::format("'{}' must be a mapping", path_.empty() ? "document" : path_));
    }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
        throw ConfigError(source_, line_of(at), message);
    }
    [[noreturn]] void fail(const std::string& message) const { throw ConfigError(source_, line(), message); }

    int line() const { return line_of(node_); }
    const std::string& source() const { return source_; }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node child(const std::string& key) {
        seen_.insert(key);
        return node_[key];
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        const YAML::Node n = child(key);
        if (!n) return std::nullopt;
        if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a scalar", qualified(key)));
        try {
            return n.as<T>();
        } catch (const YAML::BadConversion&) {
            fail(n, fmt::format("'{}' has an invalid value '{}'", qualified(key), n.Scalar()));
        }
    }

    template <class T>
    void read(const std::string& key, T& target) {
        if (auto v = optional<T>(key)) target = *v;
    }

    template <class T>
    T required(const std::string& key) {
        auto v = optional<T>(key);
        if (!v) fail(node_, fmt::format("missing required key '{}'", qualified(key)));
        return *v;
    }

    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.contains(key)) fail(kv.first, fmt::format("unknown key '{}'", qualified(key)));
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::string source_;
    std::set<std::string> seen_;
};

void check_schema(Section& root) {
    const YAML::Node n = root.child("schema_version");
    if (!n) root.fail("missing required key 'schema_version'");
    int version = 0;
    try {
        version = n.as<int>();
    } catch (const YAML::BadConversion&) {
        root.fail(n, "schema_version must be an integer");
    }
    if (version != kSchemaVersion) {
        root.fail(n, fmt::format("unsupported schema_version {} (expected {})", version, kSchemaVersion));
    }
}

// Runs a validator, re-anchoring std::invalid_argument at the given node.
template <class F>
void anchored(const Section& s, const YAML::Node& at, F&& validate) {
    try {
        validate();
    } catch (const std::invalid_argument& e) {
        s.fail(at, e.what());
    } catch (const std::domain_error& e) {
        s.fail(at, e.what());
    }
}

grid::GridParameters parse_grid(const YAML::Node& node, const std::string& path, const std::string& source,
                                grid::GridParameters p) {
    Section s(node, path, source);
    s.read("M", p.M);
    s.read("M_base", p.M_base);
    s.read("D", p.D);
    s.read("T1", p.T1);
    s.read("T2", p.T2);
    s.read("T3", p.T3);
    s.read("T4", p.T4);
    s.read("T5", p.T5);
    s.read("T6", p.T6);
    s.read("T7", p.T7);
    s.read("K1", p.K1);
    s.read("K2", p.K2);
    s.read("K3", p.K3);
    s.read("K4", p.K4);
    s.read("R", p.R);
    s.read("omega_des", p.omega_des);
    s.read("Kp", p.Kp);
    s.read("anc_min", p.anc_min);
    s.read("anc_max", p.anc_max);
    s.read("agc_enabled", p.agc_enabled);
    s.read("agc_gain", p.agc_gain);
    s.finish();
    return p;
}

YAML::Node grid_to_yaml(const grid::GridParameters& p) {
    YAML::Node n;
    n["M"] = p.M;
    n["M_base"] = p.M_base;
    n["D"] = p.D;
    n["T1"] = p.T1;
    n["T2"] = p.T2;
    n["T3"] = p.T3;
    n["T4"] = p.T4;
    n["T5"] = p.T5;
    n["T6"] = p.T6;
    n["T7"] = p.T7;
    n["K1"] = p.K1;
    n["K2"] = p.K2;
    n["K3"] = p.K3;
    n["K4"] = p.K4;
    n["R"] = p.R;
    n["omega_des"] = p.omega_des;
    n["Kp"] = p.Kp;
    n["anc_min"] = p.anc_min;
    n["anc_max"] = p.anc_max;
    n["agc_enabled"] = p.agc_enabled;
    n["agc_gain"] = p.agc_gain;
    return n;
}

sim::DisturbanceSchedule parse_disturbances(const YAML::Node& node, const std::string& path,
                                            const std::string& source) {
    if (!node.IsSequence()) throw ConfigError(source, line_of(node), fmt::format("'{}' must be a list", path));
    sim::DisturbanceSchedule schedule;
    for (std::size_t i = 0; i < node.size(); ++i) {
        Section s(node[i], fmt::format("{}[{}]", path, i), source);
        sim::Pulse pulse;
        pulse.t_start = s.required<double>("start");
        pulse.t_end = s.required<double>("end");
        pulse.magnitude = s.required<double>("magnitude");
        s.finish();
        if (!(pulse.t_start < pulse.t_end)) s.fail(node[i], "disturbance pulse needs start < end");
        if (pulse.t_start < 0.0) s.fail(node[i], "disturbance pulse must start at t >= 0");
        schedule.pulses.push_back(pulse);
    }
    return schedule;
}

YAML::Node disturbances_to_yaml(const sim::DisturbanceSchedule& schedule) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (const auto& p : schedule.pulses) {
        YAML::Node item;
        item["start"] = p.t_start;
        item["end"] = p.t_end;
        item["magnitude"] = p.magnitude;
        n.push_back(item);
    }
    return n;
}

sim::AncillaryPath parse_ancillary(const YAML::Node& node, const std::string& path, const std::string& source,
                                   const std::filesystem::path& base_dir) {
    Section s(node, path, source);
    sim::AncillaryPath a;
    const auto mode = s.required<std::string>("mode");
    if (mode == "off") {
        a.mode = sim::AncillaryMode::off;
    } else if (mode == "ideal") {
        a.mode = sim::AncillaryMode::ideal;
    } else if (mode == "lagged") {
        a.mode = sim::AncillaryMode::lagged;
    } else if (mode == "arx") {
        a.mode = sim::AncillaryMode::arx;
    } else {
        s.fail(node["mode"], fmt::format("unknown ancillary mode '{}' (expected off, ideal, lagged or arx)", mode));
    }
    s.read("lag", a.lag_s);
    const YAML::Node model = s.child("model");
    if (model) {
        if (model.IsScalar()) {
            std::filesystem::path file = model.as<std::string>();
            if (file.is_relative()) file = base_dir / file;
            try {
                a.model = load_arx_model(file);
            } catch (const ConfigError& e) {
                s.fail(model, fmt::format("while loading ARX model: {}", e.what()));
            }
        } else {
            a.model = parse_arx_model(model, source);
        }
    }
    s.finish();
    if (a.mode == sim::AncillaryMode::lagged && !(a.lag_s > 0.0)) s.fail(node, "lagged ancillary path needs lag > 0");
    if (a.mode == sim::AncillaryMode::arx && !a.model) s.fail(node, "arx ancillary path needs 'model'");
    return a;
}

}  // namespace

YAML::Node load_yaml(const std::filesystem::path& path) {
    try {
        return YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError(path.string(), 0, "cannot open file");
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path.string(), e.mark.line + 1, e.msg);
    }
}

std::string emit(const YAML::Node& node) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << node;
    return std::string(out.c_str()) + "\n";
}

SimulationConfig parse_simulation_config(const YAML::Node& root, const std::string& source,
                                         const std::filesystem::path& base_dir) {
    Section top(root, "", source);
    check_schema(top);

    double horizon = 50.0;
    std::optional<double> dt;
    if (const YAML::Node n = top.child("simulation")) {
        Section s(n, "simulation", source);
        s.read("horizon", horizon);
        dt = s.optional<double>("dt");
        s.finish();
    }

    grid::GridParameters shared;
    if (const YAML::Node n = top.child("grid")) shared = parse_grid(n, "grid", source, shared);

    sim::DisturbanceSchedule schedule;
    if (const YAML::Node n = top.child("disturbances")) schedule = parse_disturbances(n, "disturbances", source);

    const YAML::Node list = top.child("scenarios");
    if (!list || !list.IsSequence() || list.size() == 0) {
        top.fail(list ? list : root, "'scenarios' must be a non-empty list");
    }
    top.finish();

    SimulationConfig config;
    std::set<std::string> labels;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = fmt::format("scenarios[{}]", i);
        Section s(list[i], path, source);
        sim::Scenario sc;
        sc.label = s.required<std::string>("label");
        // labels become output file names
        if (sc.label.empty() || sc.label.find_first_not_of(kLabelChars) != std::string::npos || sc.label[0] == '.') {
            s.fail(list[i], fmt::format("scenario label '{}' may use only letters, digits, '-', '_' and '.'", sc.label));
        }
        if (!labels.insert(sc.label).second) s.fail(list[i], fmt::format("duplicate scenario label '{}'", sc.label));
        sc.horizon = horizon;
        sc.grid = shared;
        sc.schedule = schedule;
        if (const YAML::Node n = s.child("grid")) sc.grid = parse_grid(n, path + ".grid", source, shared);
        if (const YAML::Node n = s.child("disturbances")) {
            sc.schedule = parse_disturbances(n, path + ".disturbances", source);
        }
        if (const YAML::Node n = s.child("ancillary")) {
            sc.ancillary = parse_ancillary(n, path + ".ancillary", source, base_dir);
        }
        s.finish();

        anchored(s, list[i], [&] { sc.grid.validate(); });
        if (dt) {
            sc.dt = *dt;
        } else {
            // Default step: smallest time constant / 20, capped at 0.01 s.
            std::vector<double> taus = sc.grid.time_constants();
            if (sc.ancillary.mode == sim::AncillaryMode::lagged) taus.push_back(sc.ancillary.lag_s);
            sc.dt = linsys::default_time_step(taus);
        }
        anchored(s, list[i], [&] { sc.validate(); });
        config.scenarios.push_back(std::move(sc));
    }

    const auto& first = config.scenarios.front();
    for (std::size_t i = 1; i < config.scenarios.size(); ++i) {
        if (config.scenarios[i].dt != first.dt) {
            throw ConfigError(source, line_of(list[i]),
                              "scenarios resolve to different time steps; set simulation.dt explicitly");
        }
    }
    return config;
}

SimulationConfig load_simulation_config(const std::filesystem::path& path) {
    return parse_simulation_config(load_yaml(path), path.string(), path.parent_path());
}

YAML::Node to_yaml(const SimulationConfig& config) {
    YAML::Node root;
    root["schema_version"] = kSchemaVersion;
    if (!config.scenarios.empty()) {
        YAML::Node simulation;
        simulation["horizon"] = config.scenarios.front().horizon;
        simulation["dt"] = config.scenarios.front().dt;
        root["simulation"] = simulation;
    }
    YAML::Node list(YAML::NodeType::Sequence);
    for (const auto& sc : config.scenarios) {
        YAML::Node item;
        item["label"] = sc.label;
        YAML::Node anc;
        anc["mode"] = sim::to_string(sc.ancillary.mode);
        if (sc.ancillary.mode == sim::AncillaryMode::lagged) anc["lag"] = sc.ancillary.lag_s;
        if (sc.ancillary.mode == sim::AncillaryMode::arx && sc.ancillary.model) {
            anc["model"] = to_yaml(*sc.ancillary.model);
        }
        item["ancillary"] = anc;
        item["grid"] = grid_to_yaml(sc.grid);
        item["disturbances"] = disturbances_to_yaml(sc.schedule);
        list.push_back(item);
    }
    root["scenarios"] = list;
    return root;
}

sysid::FanFixtureConfig parse_fixture_config(const YAML::Node& root, const std::string& source) {
    Section top(root, "", source);
    check_schema(top);
    sysid::FanFixtureConfig c;
    if (const YAML::Node n = top.child("fixture")) {
        Section s(n, "fixture", source);
        s.read("low_level", c.low_level);
        s.read("high_level", c.high_level);
        s.read("switch_period_min", c.switch_period_min);
        s.read("span_min", c.span_min);
        s.read("sample_period_s", c.sample_period_s);
        s.read("noise_std_kw", c.noise_std_kw);
        s.read("seed", c.seed);
        s.finish();
    }
    if (const YAML::Node n = top.child("plant")) {
        Section s(n, "plant", source);
        s.read("pressure_time_constant_s", c.pressure_time_constant_s);
        s.read("actuation_delay_samples", c.actuation_delay_samples);
        s.read("power_at_high_kw", c.power_at_high_kw);
        s.read("power_swing_kw", c.power_swing_kw);
        s.finish();
    }
    top.finish();
    anchored(top, root, [&] { c.validate(); });
    return c;
}

YAML::Node to_yaml(const sysid::FanFixtureConfig& c) {
    YAML::Node root;
    root["schema_version"] = kSchemaVersion;
    YAML::Node f;
    f["low_level"] = c.low_level;
    f["high_level"] = c.high_level;
    f["switch_period_min"] = c.switch_period_min;
    f["span_min"] = c.span_min;
    f["sample_period_s"] = c.sample_period_s;
    f["noise_std_kw"] = c.noise_std_kw;
    f["seed"] = c.seed;
    root["fixture"] = f;
    YAML::Node p;
    p["pressure_time_constant_s"] = c.pressure_time_constant_s;
    p["actuation_delay_samples"] = c.actuation_delay_samples;
    p["power_at_high_kw"] = c.power_at_high_kw;
    p["power_swing_kw"] = c.power_swing_kw;
    root["plant"] = p;
    return root;
}

sysid::ArxModel parse_arx_model(const YAML::Node& root, const std::string& source) {
    Section top(root, "", source);
    check_schema(top);
    const auto kind = top.required<std::string>("kind");
    if (kind != "arx_model") top.fail(root["kind"], fmt::format("expected kind 'arx_model', found '{}'", kind));

    sysid::ArxModel m;
    {
        const YAML::Node n = top.child("orders");
        if (!n) top.fail(root, "missing required key 'orders'");
        Section s(n, "orders", source);
        m.orders.na = s.required<int>("na");
        m.orders.nb = s.required<int>("nb");
        m.orders.nk = s.required<int>("nk");
        s.finish();
    }
    m.sample_period = top.required<double>("sample_period");
    if (const YAML::Node n = top.child("operating_point")) {
        Section s(n, "operating_point", source);
        s.read("u", m.u_offset);
        s.read("y", m.y_offset);
        s.finish();
    }
    const YAML::Node theta = top.child("theta");
    if (!theta || !theta.IsSequence()) top.fail(theta ? theta : root, "'theta' must be a list of numbers");
    for (const auto& v : theta) {
        try {
            m.theta.push_back(v.as<double>());
        } catch (const YAML::BadConversion&) {
            top.fail(v, "'theta' entries must be numbers");
        }
    }
    top.finish();
    anchored(top, root, [&] { m.validate(); });
    return m;
}

sysid::ArxModel load_arx_model(const std::filesystem::path& path) {
    return parse_arx_model(load_yaml(path), path.string());
}

YAML::Node to_yaml(const sysid::ArxModel& m) {
    YAML::Node root;
    root["schema_version"] = kSchemaVersion;
    root["kind"] = "arx_model";
    YAML::Node orders;
    orders["na"] = m.orders.na;
    orders["nb"] = m.orders.nb;
    orders["nk"] = m.orders.nk;
    root["orders"] = orders;
    root["sample_period"] = m.sample_period;
    YAML::Node op;
    op["u"] = m.u_offset;
    op["y"] = m.y_offset;
    root["operating_point"] = op;
    YAML::Node theta(YAML::NodeType::Sequence);
    for (double v : m.theta) theta.push_back(v);
    root["theta"] = theta;
    return root;
}

FleetConfig parse_fleet_config(const YAML::Node& root, const std::string& source) {
    Section top(root, "", source);
    check_schema(top);
    FleetConfig c;
    if (const YAML::Node n = top.child("building")) {
        Section s(n, "building", source);
        s.read("swing_kw", c.building.per_building_swing_kw);
        s.read("floor_area_ft2", c.building.building_floor_area_ft2);
        s.read("response_time_s", c.building.response_time_s);
        s.finish();
    }
    top.read("vfd_fraction", c.building.vfd_fraction);
    if (const YAML::Node n = top.child("fan")) {
        Section s(n, "fan", source);
        c.fan_nominal_kw = s.required<double>("nominal_kw");
        c.fan_swing_kw = s.required<double>("swing_kw");
        s.finish();
        if (!(*c.fan_nominal_kw > 0.0)) s.fail(n, "fan.nominal_kw must be > 0");
    }
    const YAML::Node list = top.child("stock");
    if (!list || !list.IsSequence() || list.size() == 0) top.fail(list ? list : root, "'stock' must be a non-empty list");
    top.finish();
    for (std::size_t i = 0; i < list.size(); ++i) {
        Section s(list[i], fmt::format("stock[{}]", i), source);
        StockCase sc;
        sc.label = s.required<std::string>("label");
        sc.floor_area_ft2 = s.required<double>("floor_area_ft2");
        sc.reference_gw = s.optional<double>("reference_gw");
        s.finish();
        anchored(s, list[i], [&] {
            flex::FleetAssumptions a = c.building;
            a.national_floor_area_ft2 = sc.floor_area_ft2;
            a.validate();
        });
        c.stock.push_back(std::move(sc));
    }
    return c;
}

YAML::Node to_yaml(const FleetConfig& c) {
    YAML::Node root;
    root["schema_version"] = kSchemaVersion;
    YAML::Node b;
    b["swing_kw"] = c.building.per_building_swing_kw;
    b["floor_area_ft2"] = c.building.building_floor_area_ft2;
    b["response_time_s"] = c.building.response_time_s;
    root["building"] = b;
    root["vfd_fraction"] = c.building.vfd_fraction;
    if (c.fan_nominal_kw && c.fan_swing_kw) {
        YAML::Node f;
        f["nominal_kw"] = *c.fan_nominal_kw;
        f["swing_kw"] = *c.fan_swing_kw;
        root["fan"] = f;
    }
    YAML::Node list(YAML::NodeType::Sequence);
    for (const auto& sc : c.stock) {
        YAML::Node item;
        item["label"] = sc.label;
        item["floor_area_ft2"] = sc.floor_area_ft2;
        if (sc.reference_gw) item["reference_gw"] = *sc.reference_gw;
        list.push_back(item);
    }
    root["stock"] = list;
    return root;
}

namespace {

flex::Window parse_window(const YAML::Node& node, const std::string& path, const std::string& source) {
    Section s(node, path, source);
    flex::Window w;
    w.start = s.required<double>("start");
    w.end = s.required<double>("end");
    s.finish();
    if (!(w.end > w.start)) s.fail(node, fmt::format("'{}' window must have end > start", path));
    return w;
}

YAML::Node window_to_yaml(const flex::Window& w) {
    YAML::Node n;
    n["start"] = w.start;
    n["end"] = w.end;
    return n;
}

}  // namespace

DrWindows parse_dr_windows(const YAML::Node& root, const std::string& source) {
    Section top(root, "", source);
    check_schema(top);
    DrWindows w;
    const YAML::Node event = top.child("event");
    if (!event) top.fail(root, "missing required key 'event'");
    w.event = parse_window(event, "event", source);
    if (const YAML::Node n = top.child("baseline")) w.baseline = parse_window(n, "baseline", source);
    top.finish();
    return w;
}

YAML::Node to_yaml(const DrWindows& w) {
    YAML::Node root;
    root["schema_version"] = kSchemaVersion;
    root["event"] = window_to_yaml(w.event);
    if (w.baseline) root["baseline"] = window_to_yaml(*w.baseline);
    return root;
}

}  // namespace gridflex::config
