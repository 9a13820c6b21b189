#include "gridflex/flex.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gridflex::flex {

void FleetAssumptions::validate() const {
    if (!(per_building_swing_kw >= 0.0)) throw std::invalid_argument("per-building swing must be >= 0 kW");
    if (!(building_floor_area_ft2 > 0.0)) throw std::invalid_argument("building floor area must be > 0");
    if (!(national_floor_area_ft2 > 0.0)) throw std::invalid_argument("national floor area must be > 0");
    if (!(vfd_fraction >= 0.0 && vfd_fraction <= 1.0)) throw std::invalid_argument("VFD fraction must lie in [0, 1]");
    if (!(response_time_s >= 0.0)) throw std::invalid_argument("response time must be >= 0");
}

double flexibility_density(const FleetAssumptions& a) {
    a.validate();
    return a.per_building_swing_kw * kWattsPerKilowatt / a.building_floor_area_ft2;
}

CapacityEstimate national_capacity(const FleetAssumptions& a) {
    CapacityEstimate est;
    est.inputs = a;
    est.density_w_per_ft2 = flexibility_density(a);
    const double watts = est.density_w_per_ft2 * a.national_floor_area_ft2 * a.vfd_fraction;
    est.capacity_gw = kw_to_gw(watts / kWattsPerKilowatt);
    return est;
}

double swing_fraction(double nominal_kw, double swing_kw) {
    if (!(nominal_kw > 0.0)) throw std::invalid_argument("nominal power must be > 0");
    return 100.0 * swing_kw / nominal_kw;
}

void TimeSeries::validate() const {
    if (time.size() != value.size()) throw std::invalid_argument("time and value columns differ in length");
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!std::isfinite(time[i]) || !std::isfinite(value[i])) {
            throw std::invalid_argument(fmt::format("non-finite sample at row {}", i));
        }
        if (i > 0 && !(time[i] > time[i - 1])) {
            throw std::invalid_argument(fmt::format("timestamps must increase (row {})", i));
        }
    }
}

Window DrEvent::resolved_baseline() const {
    if (baseline) return *baseline;
    return Window{event.start - 2.0 * 3600.0, event.start};
}

namespace {

struct WindowMean {
    double mean = 0.0;
    std::size_t samples = 0;
};

WindowMean mean_over(const TimeSeries& s, const Window& w) {
    WindowMean m;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.time.size(); ++i) {
        if (s.time[i] >= w.start && s.time[i] < w.end) {
            sum += s.value[i];
            ++m.samples;
        }
    }
    if (m.samples > 0) m.mean = sum / static_cast<double>(m.samples);
    return m;
}

void check_window(const Window& w, const TimeSeries& s, const char* name) {
    if (!(w.end > w.start)) throw std::invalid_argument(fmt::format("{} window is empty", name));
    if (s.time.empty()) throw std::invalid_argument("power series is empty");
    if (w.start < s.time.front() || w.end > s.time.back() + 1e-9) {
        throw std::invalid_argument(fmt::format("{} window [{}, {}) lies outside the series span [{}, {}]", name,
                                                w.start, w.end, s.time.front(), s.time.back()));
    }
}

}  // namespace

DrReport analyze_dr_event(const DrEvent& e) {
    e.series.validate();
    const Window baseline = e.resolved_baseline();
    check_window(e.event, e.series, "event");
    check_window(baseline, e.series, "baseline");
    if (baseline.start < e.event.end && e.event.start < baseline.end) {
        throw std::invalid_argument("baseline and event windows overlap");
    }

    const WindowMean base = mean_over(e.series, baseline);
    const WindowMean event = mean_over(e.series, e.event);
    if (base.samples < kMinWindowSamples) {
        throw std::invalid_argument(fmt::format("baseline window holds {} samples; need at least {}", base.samples,
                                                kMinWindowSamples));
    }
    if (event.samples < kMinWindowSamples) {
        throw std::invalid_argument(fmt::format("event window holds {} samples; need at least {}", event.samples,
                                                kMinWindowSamples));
    }
    if (base.mean == 0.0) throw std::invalid_argument("baseline mean is zero; percent drop undefined");

    DrReport r;
    r.baseline = baseline;
    r.event = e.event;
    r.baseline_samples = base.samples;
    r.event_samples = event.samples;
    r.baseline_mean_kw = base.mean;
    r.event_mean_kw = event.mean;
    r.drop_kw = base.mean - event.mean;
    r.drop_percent = r.drop_kw / base.mean * 100.0;
    r.energy_saved_kwh = r.drop_kw * e.event.duration_s() / 3600.0;
    return r;
}

}  // namespace gridflex::flex
