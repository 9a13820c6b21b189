#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "gridflex/flex.hpp"
#include "gridflex/sim.hpp"
#include "gridflex/sysid.hpp"

// Structured-text (YAML) configuration and model files. Every file carries
// `schema_version: 1`; unknown keys are rejected. docs/file-formats.md
// describes each schema.
namespace gridflex::config {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
public:
    /// line is 1-based; 0 when no position is known.
    ConfigError(const std::string& source, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

/// Parses a file, mapping YAML syntax errors to ConfigError.
YAML::Node load_yaml(const std::filesystem::path& path);

/// Block-style YAML text with doubles at 17 significant digits.
std::string emit(const YAML::Node& node);

// --- simulate --------------------------------------------------------------

struct SimulationConfig {
    std::vector<sim::Scenario> scenarios;
};

/// base_dir resolves relative ARX model paths.
SimulationConfig parse_simulation_config(const YAML::Node& root, const std::string& source,
                                         const std::filesystem::path& base_dir);
SimulationConfig load_simulation_config(const std::filesystem::path& path);
/// Fully resolved form: every scenario carries its own grid, schedule and
/// inline ARX model.
YAML::Node to_yaml(const SimulationConfig& config);

// --- gen-fixture -----------------------------------------------------------

sysid::FanFixtureConfig parse_fixture_config(const YAML::Node& root, const std::string& source);
YAML::Node to_yaml(const sysid::FanFixtureConfig& config);

// --- ARX model files -------------------------------------------------------

sysid::ArxModel parse_arx_model(const YAML::Node& root, const std::string& source);
sysid::ArxModel load_arx_model(const std::filesystem::path& path);
YAML::Node to_yaml(const sysid::ArxModel& model);

// --- estimate --------------------------------------------------------------

struct StockCase {
    std::string label;
    double floor_area_ft2 = 0.0;
    std::optional<double> reference_gw;  ///< figure quoted elsewhere, echoed beside ours
};

struct FleetConfig {
    flex::FleetAssumptions building;  ///< national_floor_area_ft2 comes from each stock case
    std::vector<StockCase> stock;
    std::optional<double> fan_nominal_kw;
    std::optional<double> fan_swing_kw;
};

FleetConfig parse_fleet_config(const YAML::Node& root, const std::string& source);
YAML::Node to_yaml(const FleetConfig& config);

// --- analyze-dr ------------------------------------------------------------

struct DrWindows {
    flex::Window event;
    std::optional<flex::Window> baseline;
};

DrWindows parse_dr_windows(const YAML::Node& root, const std::string& source);
YAML::Node to_yaml(const DrWindows& windows);

}  // namespace gridflex::config
