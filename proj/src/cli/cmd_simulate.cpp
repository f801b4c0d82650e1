#include <functional>

#include "cli_common.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/svg_chart.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge::cli {

namespace {

void write_plots(const std::string& prefix, const TrainMetrics& metrics, Method method) {
  struct Panel {
    const char* file;
    const char* title;
    double StepMetrics::*field;
  };
  const Panel panels[] = {
      {"_reward.svg", "Mean reward", &StepMetrics::reward_mean},
      {"_entropy.svg", "Policy entropy", &StepMetrics::entropy},
      {"_clip_fraction.svg", "Clip fraction", &StepMetrics::clip_fraction},
      {"_pg_loss.svg", "Policy-gradient loss", &StepMetrics::pg_loss},
  };
  for (const Panel& p : panels) {
    ChartSeries s{std::string(to_string(method)), {}, {}};
    for (const StepMetrics& m : metrics.steps) {
      s.x.push_back(static_cast<double>(m.step));
      s.y.push_back(m.*p.field);
    }
    write_text(prefix + p.file, render_line_chart({p.title, "step", p.title}, {&s, 1}));
  }
}

}  // namespace

int cmd_simulate(const CommonArgs& args, const std::optional<std::string>& traces, Streams io) {
  RunConfig config = resolve_config(args);
  apply_clip_flags(config, args, config.train.method);
  const TrainConfig train = config.train_config();

  std::vector<TokenTrace> dumped;
  MinibatchObserver observer;
  if (traces && train.steps > 0) {
    observer = [&](const MinibatchView& view) {
      if (view.step + 1 != train.steps) return;
      for (const Rollout& r : view.batch.rollouts) dumped.push_back(r.trace);
    };
  }

  TrainMetrics metrics;
  try {
    metrics = run_training(train, args.threads, observer);
  } catch (const TrainingDiverged& e) {
    write_report_csv(args.output, e.partial());
    throw;
  }
  write_report_csv(args.output, metrics);
  if (traces) write_traces(*traces, dumped);
  if (args.plot) write_plots(*args.plot, metrics, train.method);

  if (!metrics.steps.empty()) {
    const StepMetrics& last = metrics.steps.back();
    io.out << to_string(train.method) << ": steps=" << metrics.steps.size()
           << " final_reward=" << format_number(last.reward_mean)
           << " final_pg_loss=" << format_number(last.pg_loss) << '\n';
  } else {
    io.out << to_string(train.method) << ": steps=0\n";
  }
  return 0;
}

}  // namespace ratio_forge::cli
