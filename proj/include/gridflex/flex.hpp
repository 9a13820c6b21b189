#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

// Fleet-level fan flexibility arithmetic and demand-response event analytics.
namespace gridflex::flex {

inline constexpr double kWattsPerKilowatt = 1e3;
inline constexpr double kKilowattsPerGigawatt = 1e6;

inline double kw_to_gw(double kw) { return kw / kKilowattsPerGigawatt; }
inline double gw_to_kw(double gw) { return gw * kKilowattsPerGigawatt; }

struct FleetAssumptions {
    double per_building_swing_kw = 24.0;
    double building_floor_area_ft2 = 141000.0;
    double national_floor_area_ft2 = 72e9;
    double vfd_fraction = 0.30;
    double response_time_s = 1.0;

    void validate() const;
};

/// W per square foot.
double flexibility_density(const FleetAssumptions& a);

struct CapacityEstimate {
    FleetAssumptions inputs;
    double density_w_per_ft2 = 0.0;
    double capacity_gw = 0.0;
};

CapacityEstimate national_capacity(const FleetAssumptions& a);

/// 100 * swing / nominal. Throws std::invalid_argument when nominal <= 0.
double swing_fraction(double nominal_kw, double swing_kw);

struct TimeSeries {
    std::vector<double> time;   ///< epoch seconds, increasing
    std::vector<double> value;  ///< kW

    void validate() const;
};

/// Half-open [start, end), epoch seconds.
struct Window {
    double start = 0.0;
    double end = 0.0;

    double duration_s() const { return end - start; }
};

struct DrEvent {
    TimeSeries series;
    Window event;
    std::optional<Window> baseline;  ///< defaults to the 2 h before the event

    Window resolved_baseline() const;
};

struct DrReport {
    Window baseline;
    Window event;
    std::size_t baseline_samples = 0;
    std::size_t event_samples = 0;
    double baseline_mean_kw = 0.0;
    double event_mean_kw = 0.0;
    double drop_kw = 0.0;
    double drop_percent = 0.0;
    double energy_saved_kwh = 0.0;
};

inline constexpr std::size_t kMinWindowSamples = 10;

/// Throws std::invalid_argument for empty, overlapping or out-of-span windows
/// or fewer than kMinWindowSamples samples in a window.
DrReport analyze_dr_event(const DrEvent& e);

}  // namespace gridflex::flex
