#include "gridflex/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace gridflex::csv {

std::string format_double(double v) {
    return fmt::format("{:.17g}", v);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        fields.push_back(first == std::string::npos ? std::string{} : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool parse_number(const std::string& text, double& value) {
    if (text.empty()) return false;
    const char* begin = text.data();
    if (*begin == '+') ++begin;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(fmt::format("{}: cannot open file", path.string()));

    Table table;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split(line);
        if (table.header.empty()) {
            double probe = 0.0;
            if (parse_number(fields.front(), probe)) {
                throw CsvError(fmt::format("{}:{}: header row required", path.string(), row));
            }
            table.header = std::move(fields);
            table.columns.resize(table.header.size());
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw CsvError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), row, table.header.size(),
                                       fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_number(fields[c], v) || !std::isfinite(v)) {
                throw CsvError(fmt::format("{}:{}: field '{}' is not a finite number", path.string(), row, fields[c]));
            }
            table.columns[c].push_back(v);
        }
    }
    if (table.header.empty()) throw CsvError(fmt::format("{}: file is empty", path.string()));
    return table;
}

double check_uniform_sampling(const std::vector<double>& timestamps, const std::string& source, double tolerance) {
    if (timestamps.size() < 2) throw CsvError(fmt::format("{}: need at least two samples", source));
    std::vector<double> steps(timestamps.size() - 1);
    for (std::size_t i = 0; i + 1 < timestamps.size(); ++i) steps[i] = timestamps[i + 1] - timestamps[i];
    std::vector<double> sorted = steps;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double nominal = sorted[sorted.size() / 2];
    if (!(nominal > 0.0)) throw CsvError(fmt::format("{}: timestamps must increase", source));
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (std::abs(steps[i] - nominal) > tolerance * nominal) {
            throw CsvError(fmt::format("{}: non-uniform sampling between data rows {} and {} (step {} vs nominal {})",
                                       source, i + 1, i + 2, steps[i], nominal));
        }
    }
    return nominal;
}

sysid::IoRecord read_io_record(const std::filesystem::path& path) {
    Table t = read_table(path);
    if (t.header.size() != 3) {
        throw CsvError(fmt::format("{}: expected three columns (timestamp, u, y), found {}", path.string(),
                                   t.header.size()));
    }
    sysid::IoRecord rec;
    rec.sample_period = check_uniform_sampling(t.columns[0], path.string());
    rec.timestamps = std::move(t.columns[0]);
    rec.u = std::move(t.columns[1]);
    rec.y = std::move(t.columns[2]);
    return rec;
}

sysid::IoRecord read_io_record(const std::filesystem::path& input_path, const std::filesystem::path& output_path) {
    Table in = read_table(input_path);
    Table out = read_table(output_path);
    for (const auto* t : {&in, &out}) {
        if (t->header.size() != 2) {
            throw CsvError(fmt::format("{}: expected two columns (timestamp, value)",
                                       (t == &in ? input_path : output_path).string()));
        }
    }
    const double period = check_uniform_sampling(in.columns[0], input_path.string());
    check_uniform_sampling(out.columns[0], output_path.string());
    if (in.columns[0].size() != out.columns[0].size()) {
        throw CsvError("input and output files have different sample counts");
    }
    for (std::size_t i = 0; i < in.columns[0].size(); ++i) {
        if (std::abs(in.columns[0][i] - out.columns[0][i]) > 0.01 * period) {
            throw CsvError(fmt::format("input and output timestamps disagree at data row {}", i + 1));
        }
    }
    sysid::IoRecord rec;
    rec.sample_period = period;
    rec.timestamps = std::move(in.columns[0]);
    rec.u = std::move(in.columns[1]);
    rec.y = std::move(out.columns[1]);
    return rec;
}

void write_io_record(std::ostream& out, const sysid::IoRecord& rec) {
    out << "timestamp,u,y\n";
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double ts = rec.timestamps.empty() ? static_cast<double>(i) * rec.sample_period : rec.timestamps[i];
        out << format_double(ts) << ',' << format_double(rec.u[i]) << ',' << format_double(rec.y[i]) << '\n';
    }
}

flex::TimeSeries read_power_series(const std::filesystem::path& path) {
    Table t = read_table(path);
    if (t.header.size() != 2) {
        throw CsvError(fmt::format("{}: expected two columns (timestamp, kW)", path.string()));
    }
    flex::TimeSeries s;
    s.time = std::move(t.columns[0]);
    s.value = std::move(t.columns[1]);
    check_uniform_sampling(s.time, path.string());
    return s;
}

void write_trajectory(std::ostream& out, const sim::Trajectory& traj) {
    out << "t,omega,delta_PD,delta_PC,P_anc,P_GV,delta_PM\n";
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
        const auto& b = traj.samples[k];
        out << format_double(traj.time[k]) << ',' << format_double(b.omega) << ',' << format_double(b.delta_PD) << ','
            << format_double(b.delta_PC) << ',' << format_double(b.P_anc) << ',' << format_double(b.P_GV) << ','
            << format_double(b.delta_PM) << '\n';
    }
}

void write_comparison(std::ostream& out, const sim::Comparison& cmp) {
    out << "label,max_abs_domega,time_of_max,integral_abs_domega,ancillary_energy,settling_time,rank_by_max,"
           "rank_by_integral\n";
    for (const auto& r : cmp.rows) {
        out << r.label << ',' << format_double(r.summary.max_abs_domega) << ',' << format_double(r.summary.time_of_max)
            << ',' << format_double(r.summary.integral_abs_domega) << ',' << format_double(r.summary.ancillary_energy)
            << ',' << format_double(r.summary.settling_time) << ',' << r.rank_by_max << ',' << r.rank_by_integral
            << '\n';
    }
}

void write_dr_report(std::ostream& out, const flex::DrReport& r) {
    out << "baseline_start,baseline_end,event_start,event_end,baseline_samples,event_samples,baseline_mean_kw,"
           "event_mean_kw,drop_kw,drop_percent,energy_saved_kwh\n";
    out << format_double(r.baseline.start) << ',' << format_double(r.baseline.end) << ','
        << format_double(r.event.start) << ',' << format_double(r.event.end) << ',' << r.baseline_samples << ','
        << r.event_samples << ',' << format_double(r.baseline_mean_kw) << ',' << format_double(r.event_mean_kw) << ','
        << format_double(r.drop_kw) << ',' << format_double(r.drop_percent) << ','
        << format_double(r.energy_saved_kwh) << '\n';
}

}  // namespace gridflex::csv
