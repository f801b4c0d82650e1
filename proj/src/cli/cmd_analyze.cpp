#include <cmath>
#include <string>

#include "cli_common.hpp"
#include "ratio_forge/diagnostics.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/svg_chart.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge::cli {

namespace {

std::vector<double> raw_ratios(const TokenTrace& tr) {
  const LogRatioSeries z = compute_log_ratios(tr);
  std::vector<double> r(z.size(), 1.0);
  for (std::size_t t = 0; t < z.size(); ++t)
    if (z.mask[t]) r[t] = std::exp(z.values[t]);
  return r;
}

ChartSeries window_curve(const std::string& label, const std::vector<std::vector<double>>& ratios,
                         const std::vector<TraceRecord>& records, const DiagnosticsOptions& opts) {
  std::vector<std::vector<double>> curves;
  for (std::size_t i = 0; i < records.size(); ++i)
    curves.push_back(window_offpolicy_frequency(
        classify_token_states(ratios[i], records[i].trace.mask, opts.band), opts.window));
  const WindowCurve agg = aggregate_window_curves(curves);
  ChartSeries s{label, {}, agg.mean};
  for (std::size_t w = 0; w < agg.mean.size(); ++w) s.x.push_back(static_cast<double>(w));
  return s;
}

ChartSeries trajectory(const std::string& label, const std::vector<double>& ratios, const Mask& mask) {
  ChartSeries s{label, {}, {}};
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    if (!mask[t]) continue;
    s.x.push_back(static_cast<double>(t));
    s.y.push_back(ratios[t]);
  }
  return s;
}

}  // namespace

int cmd_analyze(const CommonArgs& args, Streams io) {
  RunConfig config = resolve_config(args);
  apply_clip_flags(config, args, Method::kKpoClipped);
  const DiagnosticsOptions opts = config.diagnostics();
  const std::vector<TraceRecord> records = read_trace_records(args.input);

  std::size_t with_filtered = 0;
  std::size_t valid_tokens = 0;
  for (const TraceRecord& r : records) {
    with_filtered += r.filtered ? 1 : 0;
    valid_tokens += r.trace.valid_count();
  }
  if (valid_tokens == 0) throw InputError(args.input + ": no valid tokens to analyze");
  if (with_filtered != 0 && with_filtered != records.size())
    throw InputError(args.input + ": filtered columns present on some records but not all");
  const bool paired = with_filtered != 0;

  std::vector<std::vector<double>> raw(records.size());
  std::vector<std::vector<double>> filtered(paired ? records.size() : 0);
  std::vector<RatioSample> raw_samples, filtered_samples;
  for (std::size_t i = 0; i < records.size(); ++i) {
    raw[i] = raw_ratios(records[i].trace);
    raw_samples.push_back({raw[i], &records[i].trace.mask});
    if (paired) {
      filtered[i] = records[i].filtered->filtered_ratio;
      for (std::size_t t = 0; t < filtered[i].size(); ++t)
        if (!records[i].trace.mask[t]) filtered[i][t] = 1.0;
      filtered_samples.push_back({filtered[i], &records[i].trace.mask});
    }
  }

  std::vector<NamedReport> rows;
  if (paired) {
    const PairedDynamicsReport pr = dynamics_report(raw_samples, filtered_samples, opts, args.threads);
    rows = {{"raw", pr.before}, {"filtered", pr.after}};
  } else {
    rows = {{"raw", dynamics_over(raw_samples, opts, args.threads)}};
  }
  write_report_csv(args.output, rows);

  if (args.plot) {
    std::vector<ChartSeries> curves{window_curve("raw", raw, records, opts)};
    if (paired) curves.push_back(window_curve("filtered", filtered, records, opts));
    write_text(*args.plot + "_window_freq.svg",
               render_line_chart({"Window off-policy frequency", "window", "off-policy fraction"}, curves));

    std::size_t first = 0;
    while (records[first].trace.valid_count() == 0) ++first;
    const Mask& mask = records[first].trace.mask;
    std::vector<ChartSeries> traj{trajectory("raw", raw[first], mask)};
    if (paired) traj.push_back(trajectory("filtered", filtered[first], mask));
    write_text(*args.plot + "_ratio.svg",
               render_line_chart({"Ratio trajectory: " + records[first].trace.sample_id, "token",
                                  "ratio"},
                                 traj));
  }
  for (const NamedReport& r : rows)
    io.out << r.series << ": samples=" << r.report.samples
           << " switch_freq=" << format_number(r.report.switch_frequency)
           << " lfr=" << format_number(r.report.lfr) << '\n';
  return 0;
}

}  // namespace ratio_forge::cli
