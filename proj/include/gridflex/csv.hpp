#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridflex/flex.hpp"
#include "gridflex/sim.hpp"
#include "gridflex/sysid.hpp"

namespace gridflex::csv {

/// 17 significant digits; round-trips every double.
std::string format_double(double v);

/// Malformed or non-uniform CSV input. The message carries file and row.
class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

/// Reads a numeric CSV whose first line is a header.
Table read_table(const std::filesystem::path& path);

/// Nominal period is the median timestamp step; every step must be within
/// tolerance * nominal of it. Returns the nominal period.
double check_uniform_sampling(const std::vector<double>& timestamps, const std::string& source,
                              double tolerance = 0.01);

/// Three columns: timestamp, u, y.
sysid::IoRecord read_io_record(const std::filesystem::path& path);
/// Two files of (timestamp, value); timestamps must agree.
sysid::IoRecord read_io_record(const std::filesystem::path& input_path, const std::filesystem::path& output_path);
void write_io_record(std::ostream& out, const sysid::IoRecord& rec);

/// Two columns: timestamp (epoch s), kW.
flex::TimeSeries read_power_series(const std::filesystem::path& path);

/// Header: t,omega,delta_PD,delta_PC,P_anc,P_GV,delta_PM
void write_trajectory(std::ostream& out, const sim::Trajectory& traj);
void write_comparison(std::ostream& out, const sim::Comparison& cmp);
void write_dr_report(std::ostream& out, const flex::DrReport& report);

}  // namespace gridflex::csv
