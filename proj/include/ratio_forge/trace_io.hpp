#pragma once

// File formats. Traces are JSON Lines, one record per line:
//
//   {"schema_version":1,"sample_id":"a","group_id":"g","tokens":[3,5],
//    "logp_old":[-1.2,-0.4],"logp_new":[-1.1,-0.5],"mask":[true,true],"score":1}
//
// Filtered files add per-token rho_post, p_post, gain and filtered_ratio
// arrays, with null at masked positions. Numbers use the shortest text that
// parses back to the same double. Reports are CSV with a header row and LF
// line endings.

#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ratio_forge/diagnostics.hpp"
#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/toy_sim.hpp"
#include "ratio_forge/trace.hpp"

namespace ratio_forge {

inline constexpr int kTraceSchemaVersion = 1;

// Filter outputs attached to a trace; NaN at masked positions.
struct FilteredColumns {
  std::vector<double> rho_post;
  std::vector<double> p_post;
  std::vector<double> gain;
  std::vector<double> filtered_ratio;
};

struct TraceRecord {
  TokenTrace trace;
  std::optional<FilteredColumns> filtered;
};

std::vector<TraceRecord> parse_trace_records(std::istream& in, const std::string& source);
std::vector<TraceRecord> read_trace_records(const std::filesystem::path& path);

// Plain traces; filtered columns, if present, are validated and dropped.
std::vector<TokenTrace> read_traces(const std::filesystem::path& path);

std::string format_trace(const TokenTrace& trace);
std::string format_filtered(const TokenTrace& trace, const FilteredSeries& filtered,
                            std::span<const double> filtered_ratio);

void write_traces(const std::filesystem::path& path, std::span<const TokenTrace> traces);

// filtered_ratio[i] holds the ratio-space values for traces[i].
void write_filtered(const std::filesystem::path& path, std::span<const TokenTrace> traces,
                    std::span<const FilteredSeries> filtered,
                    std::span<const std::vector<double>> filtered_ratio);

// Shortest round-trip decimal text. Throws InputError for NaN or infinity.
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Columns: series, representation, samples, up_prop, down_prop, on_prop,
// up_rl, down_rl, on_rl, switch_freq, lfr, glob_var, win_var.
struct NamedReport {
  std::string series;
  DynamicsReport report;
};
CsvTable report_table(std::span<const NamedReport> reports);

// Columns: step, reward_mean, entropy, clip_fraction, pg_loss.
CsvTable metrics_table(const TrainMetrics& metrics);

void write_report_csv(const std::filesystem::path& path, std::span<const NamedReport> reports);
void write_report_csv(const std::filesystem::path& path, const TrainMetrics& metrics);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace ratio_forge
