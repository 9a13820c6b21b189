#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gridflex/sysid.hpp"

namespace gridflex::sysid {

namespace {

constexpr double kMinPressure = 1.2;
constexpr double kMaxPressure = 1.9;

// Box-Muller on raw mt19937_64 words; std::normal_distribution is not
// specified bit-for-bit across standard libraries.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    // (0, 1]
    double uniform_open() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

void FanFixtureConfig::validate() const {
    auto in_band = [](double p) { return p >= kMinPressure - 1e-12 && p <= kMaxPressure + 1e-12; };
    if (!in_band(low_level)) throw std::invalid_argument("low_level must lie in [1.2, 1.9] in. of water");
    if (!in_band(high_level)) throw std::invalid_argument("high_level must lie in [1.2, 1.9] in. of water");
    if (low_level > high_level) throw std::invalid_argument("low_level must not exceed high_level");
    if (switch_period_min < 1 || switch_period_min > 3) {
        throw std::invalid_argument("switch_period_min must be 1, 2 or 3 (got " + std::to_string(switch_period_min) +
                                    ")");
    }
    if (!(span_min > 0.0)) throw std::invalid_argument("span_min must be positive");
    if (!(sample_period_s > 0.0)) throw std::invalid_argument("sample_period_s must be positive");
    const double per_period = switch_period_min * 60.0 / sample_period_s;
    if (std::abs(per_period - std::round(per_period)) > 1e-9) {
        throw std::invalid_argument("switch period must be an integer number of samples");
    }
    const double per_span = span_min * 60.0 / sample_period_s;
    if (std::abs(per_span - std::round(per_span)) > 1e-9) {
        throw std::invalid_argument("span must be an integer number of samples");
    }
    if (!(noise_std_kw >= 0.0)) throw std::invalid_argument("noise_std_kw must be >= 0");
    if (!(pressure_time_constant_s > 0.0)) throw std::invalid_argument("pressure_time_constant_s must be positive");
    if (actuation_delay_samples < 0) throw std::invalid_argument("actuation_delay_samples must be >= 0");
    if (!(power_swing_kw >= 0.0) || !(power_at_high_kw > power_swing_kw)) {
        throw std::invalid_argument("power_at_high_kw must exceed power_swing_kw >= 0");
    }
}

IoRecord generate_fan_fixture(const FanFixtureConfig& config) {
    config.validate();

    const auto samples_per_switch = static_cast<long>(std::lround(config.switch_period_min * 60.0 / config.sample_period_s));
    const auto last = static_cast<long>(std::lround(config.span_min * 60.0 / config.sample_period_s));
    const auto count = static_cast<std::size_t>(last + 1);

    // Static curve through (1.9, P_high) and (1.2, P_high - swing): the full
    // pressure band maps onto the configured swing.
    const double top = std::pow(kMaxPressure, 1.5);
    const double bottom = std::pow(kMinPressure, 1.5);
    const double slope = config.power_swing_kw / (top - bottom);
    const double intercept = config.power_at_high_kw - slope * top;
    auto fan_power = [&](double pressure) { return intercept + slope * std::pow(pressure, 1.5); };

    IoRecord rec;
    rec.sample_period = config.sample_period_s;
    rec.u.resize(count);
    rec.y.resize(count);
    rec.timestamps.resize(count);

    for (std::size_t k = 0; k < count; ++k) {
        const long half_cycles = static_cast<long>(k) / samples_per_switch;
        rec.u[k] = (half_cycles % 2 == 0) ? config.high_level : config.low_level;
        rec.timestamps[k] = static_cast<double>(k) * config.sample_period_s;
    }

    // Exact discretisation of the lag for a set-point held over each sample.
    const double alpha = std::exp(-config.sample_period_s / config.pressure_time_constant_s);
    GaussianSource noise(config.seed);
    double pressure = rec.u.front();
    for (std::size_t k = 0; k < count; ++k) {
        const double measured_noise = config.noise_std_kw > 0.0 ? config.noise_std_kw * noise.next() : 0.0;
        rec.y[k] = fan_power(pressure) + measured_noise;

        const long driving = static_cast<long>(k) - config.actuation_delay_samples;
        const double setpoint = driving < 0 ? rec.u.front() : rec.u[static_cast<std::size_t>(driving)];
        pressure = alpha * pressure + (1.0 - alpha) * setpoint;
    }
    return rec;
}

std::size_t count_switching_edges(std::span<const double> u) {
    std::size_t edges = 0;
    for (std::size_t k = 1; k < u.size(); ++k) {
        if (u[k] != u[k - 1]) ++edges;
    }
    return edges;
}

}  // namespace gridflex::sysid
