#include <fmt/format.h>

#include "cli_common.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/parallel.hpp"
#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge::cli {

int cmd_filter(const CommonArgs& args, Streams io) {
  const RunConfig config = resolve_config(args);
  const KalmanParams params = config.kalman();
  const std::vector<TokenTrace> traces = read_traces(args.input);

  std::vector<FilteredSeries> filtered(traces.size());
  std::vector<std::vector<double>> ratios(traces.size());
  parallel_for(traces.size(), args.threads, [&](std::size_t i) {
    filtered[i] = kalman_filter_sequence(compute_log_ratios(traces[i]), params);
    try {
      ratios[i] = to_ratio_space(filtered[i], config.saturation_bound);
    } catch (const SaturationError& e) {
      throw NumericError("trace '" + traces[i].sample_id + "': " + e.what());
    }
  });
  write_filtered(args.output, traces, filtered, ratios);

  std::size_t tokens = 0;
  double gain_sum = 0.0;
  for (const FilteredSeries& f : filtered)
    for (std::size_t t = 0; t < f.size(); ++t)
      if (f.mask[t]) {
        ++tokens;
        gain_sum += f.gain[t];
      }
  io.out << fmt::format("sequences={} tokens={} mean_gain={:.6g}\n", traces.size(), tokens,
                        tokens == 0 ? 0.0 : gain_sum / static_cast<double>(tokens));
  return 0;
}

}  // namespace ratio_forge::cli
