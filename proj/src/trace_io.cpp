#include "ratio_forge/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ratio_forge/errors.hpp"

namespace ratio_forge {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kTraceFields = {
    "schema_version", "sample_id", "group_id", "tokens", "logp_old", "logp_new", "mask", "score"};
const std::set<std::string, std::less<>> kFilteredFields = {"rho_post", "p_post", "gain",
                                                             "filtered_ratio"};

struct LineContext {
  const std::string& source;
  std::size_t line;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ValidationError(source, line, field, what);
  }
};

const json& require(const json& obj, const char* field, const LineContext& ctx) {
  const auto it = obj.find(field);
  if (it == obj.end()) ctx.fail(field, "missing");
  return *it;
}

std::string string_field(const json& obj, const char* field, const LineContext& ctx) {
  const json& v = require(obj, field, ctx);
  if (!v.is_string()) ctx.fail(field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> number_array(const json& v, const std::string& field, const LineContext& ctx) {
  if (!v.is_array()) ctx.fail(field, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (!x.is_number()) ctx.fail(field, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// Filtered columns carry null where the token is masked.
std::vector<double> nullable_array(const json& v, const std::string& field, const Mask& mask,
                                   const LineContext& ctx) {
  if (!v.is_array()) ctx.fail(field, "expected an array");
  if (v.size() != mask.size()) ctx.fail(field, "length differs from tokens");
  std::vector<double> out(v.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < v.size(); ++t) {
    const json& x = v[t];
    if (!mask[t]) {
      if (!x.is_null()) ctx.fail(field, "entry " + std::to_string(t) + " must be null (masked)");
      continue;
    }
    if (!x.is_number()) ctx.fail(field, "entry " + std::to_string(t) + " must be a number");
    out[t] = x.get<double>();
    if (!std::isfinite(out[t])) ctx.fail(field, "entry " + std::to_string(t) + " is not finite");
  }
  return out;
}

TraceRecord parse_record(const std::string& text, const LineContext& ctx) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ctx.source, ctx.line, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(ctx.source, ctx.line, "expected a JSON object");

  const json& version = require(obj, "schema_version", ctx);
  if (!version.is_number_integer() || version.get<long long>() != kTraceSchemaVersion)
    throw VersionError(ctx.source + ", line " + std::to_string(ctx.line) +
                       ": unsupported schema_version " + version.dump() + " (expected 1)");

  for (const auto& item : obj.items())
    if (!kTraceFields.contains(item.key()) && !kFilteredFields.contains(item.key()))
      ctx.fail(item.key(), "unknown field");

  TraceRecord rec;
  TokenTrace& tr = rec.trace;
  tr.sample_id = string_field(obj, "sample_id", ctx);
  tr.group_id = string_field(obj, "group_id", ctx);

  const json& tokens = require(obj, "tokens", ctx);
  if (!tokens.is_array()) ctx.fail("tokens", "expected an array");
  for (const json& x : tokens) {
    if (!x.is_number_integer()) ctx.fail("tokens", "expected integers");
    tr.tokens.push_back(x.get<std::int64_t>());
  }
  tr.logp_old = number_array(require(obj, "logp_old", ctx), "logp_old", ctx);
  tr.logp_new = number_array(require(obj, "logp_new", ctx), "logp_new", ctx);

  const json& mask = require(obj, "mask", ctx);
  if (!mask.is_array()) ctx.fail("mask", "expected an array");
  for (const json& x : mask) {
    if (!x.is_boolean()) ctx.fail("mask", "expected booleans");
    tr.mask.push_back(x.get<bool>());
  }
  const json& score = require(obj, "score", ctx);
  if (!score.is_number()) ctx.fail("score", "expected a number");
  tr.score = score.get<double>();

  try {
    validate_trace(tr);
  } catch (const ValidationError& e) {
    ctx.fail(e.field(), e.detail());
  }

  std::size_t present = 0;
  for (const auto& f : kFilteredFields) present += obj.contains(f) ? 1 : 0;
  if (present != 0) {
    if (present != kFilteredFields.size())
      for (const auto& f : kFilteredFields)
        if (!obj.contains(f)) ctx.fail(f, "missing (filtered records carry all four columns)");
    FilteredColumns cols;
    cols.rho_post = nullable_array(obj["rho_post"], "rho_post", tr.mask, ctx);
    cols.p_post = nullable_array(obj["p_post"], "p_post", tr.mask, ctx);
    cols.gain = nullable_array(obj["gain"], "gain", tr.mask, ctx);
    cols.filtered_ratio = nullable_array(obj["filtered_ratio"], "filtered_ratio", tr.mask, ctx);
    rec.filtered = std::move(cols);
  }
  return rec;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void append_string(std::string& out, const std::string& s) { out += json(s).dump(); }

void append_numbers(std::string& out, std::span<const double> values, const Mask* mask) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if (mask != nullptr && !(*mask)[i])
      out += "null";
    else
      out += format_number(values[i]);
  }
  out += ']';
}

void append_trace_fields(std::string& out, const TokenTrace& tr) {
  validate_trace(tr);
  out += "{\"schema_version\":1,\"sample_id\":";
  append_string(out, tr.sample_id);
  out += ",\"group_id\":";
  append_string(out, tr.group_id);
  out += ",\"tokens\":[";
  for (std::size_t i = 0; i < tr.tokens.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(tr.tokens[i]);
  }
  out += "],\"logp_old\":";
  append_numbers(out, tr.logp_old, nullptr);
  out += ",\"logp_new\":";
  append_numbers(out, tr.logp_new, nullptr);
  out += ",\"mask\":[";
  for (std::size_t i = 0; i < tr.mask.size(); ++i) {
    if (i > 0) out += ',';
    out += tr.mask[i] ? "true" : "false";
  }
  out += "],\"score\":";
  out += format_number(tr.score);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) throw InputError("refusing to serialize a non-finite value");
  if (value == 0.0 && std::signbit(value)) return "-0.0";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::vector<TraceRecord> parse_trace_records(std::istream& in, const std::string& source) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_record(line, LineContext{source, number}));
  }
  return out;
}

std::vector<TraceRecord> read_trace_records(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return parse_trace_records(in, path.string());
}

std::vector<TokenTrace> read_traces(const std::filesystem::path& path) {
  std::vector<TokenTrace> out;
  for (TraceRecord& r : read_trace_records(path)) out.push_back(std::move(r.trace));
  return out;
}

std::string format_trace(const TokenTrace& trace) {
  std::string out;
  append_trace_fields(out, trace);
  out += '}';
  return out;
}

std::string format_filtered(const TokenTrace& trace, const FilteredSeries& filtered,
                            std::span<const double> filtered_ratio) {
  const std::size_t n = trace.size();
  if (filtered.size() != n || filtered_ratio.size() != n)
    throw InputError("trace '" + trace.sample_id + "': filtered length differs from tokens");
  std::string out;
  append_trace_fields(out, trace);
  out += ",\"rho_post\":";
  append_numbers(out, filtered.rho_post, &trace.mask);
  out += ",\"p_post\":";
  append_numbers(out, filtered.p_post, &trace.mask);
  out += ",\"gain\":";
  append_numbers(out, filtered.gain, &trace.mask);
  out += ",\"filtered_ratio\":";
  append_numbers(out, filtered_ratio, &trace.mask);
  out += '}';
  return out;
}

void write_traces(const std::filesystem::path& path, std::span<const TokenTrace> traces) {
  std::string out;
  for (const TokenTrace& t : traces) {
    out += format_trace(t);
    out += '\n';
  }
  write_text(path, out);
}

void write_filtered(const std::filesystem::path& path, std::span<const TokenTrace> traces,
                    std::span<const FilteredSeries> filtered,
                    std::span<const std::vector<double>> filtered_ratio) {
  if (filtered.size() != traces.size() || filtered_ratio.size() != traces.size())
    throw InputError("one filtered series per trace required");
  std::string out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    out += format_filtered(traces[i], filtered[i], filtered_ratio[i]);
    out += '\n';
  }
  write_text(path, out);
}

std::string format_csv(const CsvTable& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    if (row.size() != table.header.size()) throw InputError("CSV row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool at_field_start = true;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && at_field_start) {
      quoted = true;
      at_field_start = false;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      at_field_start = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(row));
      row.clear();
      at_field_start = true;
      ++line;
    } else {
      field += c;
      at_field_start = false;
    }
  }
  if (quoted) throw ParseError(source, line, "unterminated quoted field");
  if (!at_field_start || !row.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  if (records.empty()) throw ParseError(source, 1, "missing CSV header");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw ParseError(source, r + 1,
                       "expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(records[r].size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_text(path), path.string());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_text(path, format_csv(table));
}

CsvTable report_table(std::span<const NamedReport> reports) {
  CsvTable t;
  t.header = {"series", "representation", "samples", "up_prop",     "down_prop", "on_prop", "up_rl",
              "down_rl", "on_rl",         "switch_freq", "lfr",     "glob_var",  "win_var"};
  for (const NamedReport& nr : reports) {
    const DynamicsReport& r = nr.report;
    t.rows.push_back({nr.series, std::string(to_string(r.representation)), std::to_string(r.samples),
                      format_number(r.proportions[0]), format_number(r.proportions[1]),
                      format_number(r.proportions[2]), format_number(r.mean_run_lengths[0]),
                      format_number(r.mean_run_lengths[1]), format_number(r.mean_run_lengths[2]),
                      format_number(r.switch_frequency), format_number(r.lfr),
                      format_number(r.global_variance), format_number(r.windowed_local_variance)});
  }
  return t;
}

CsvTable metrics_table(const TrainMetrics& metrics) {
  CsvTable t;
  t.header = {"step", "reward_mean", "entropy", "clip_fraction", "pg_loss"};
  for (const StepMetrics& m : metrics.steps)
    t.rows.push_back({std::to_string(m.step), format_number(m.reward_mean), format_number(m.entropy),
                      format_number(m.clip_fraction), format_number(m.pg_loss)});
  return t;
}

void write_report_csv(const std::filesystem::path& path, std::span<const NamedReport> reports) {
  write_csv(path, report_table(reports));
}

void write_report_csv(const std::filesystem::path& path, const TrainMetrics& metrics) {
  write_csv(path, metrics_table(metrics));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace ratio_forge
