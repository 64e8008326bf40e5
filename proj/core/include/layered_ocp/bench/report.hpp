#pragma once

#include <string>

#include "layered_ocp/bench/experiments.hpp"

namespace layered_ocp::bench {

inline constexpr const char *kReportSchema = "layered-ocp-report/1";

/// Three CSV documents: one row per trial and solver, one row per
/// (trial, solver, timestep), one row per (trial, outer iteration).
struct CsvReport {
  std::string summary;
  std::string trajectories;
  std::string residuals;
};

CsvReport report_to_csv(const ExperimentReport &report);
std::string report_to_json(const ExperimentReport &report);

/// Parsers rebuild per-trial records and recompute the aggregates from them.
/// Throw InvalidArgument on a schema mismatch or a missing field.
ExperimentReport parse_csv_summary(const std::string &summary);
ExperimentReport parse_json_report(const std::string &text);

/// `path` is the JSON file, or the summary CSV with `_trajectories.csv` and
/// `_residuals.csv` siblings. Returns the paths written.
std::vector<std::string> write_report(const ExperimentReport &report, const std::string &path,
                                      Format format);

/// Sibling path: "out/run.csv" + "_trajectories" -> "out/run_trajectories.csv".
std::string sibling_path(const std::string &path, const std::string &suffix);

}  // namespace layered_ocp::bench
