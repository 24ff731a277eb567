#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "catdif/harness.hpp"

namespace catdif {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parse and validate a study configuration; unknown keys are rejected.
StudyConfig parse_config(std::istream& is);
StudyConfig parse_config_file(const std::string& path);

/// Serialize back to JSON (round-trips through parse_config).
std::string serialize_config(const StudyConfig& cfg);

/// Writes precision.csv, type1.csv, power.csv, drops.csv, fits.csv,
/// meta.json into dir.
void emit_tables(const StudyReport& report, const std::string& dir);

/// Writes type1_by_model.csv, icc_histogram.csv, interval_barplot.csv.
void emit_plot_data(const StudyReport& report, const std::string& dir);

}  // namespace catdif
