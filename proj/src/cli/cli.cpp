#include "ratio_forge/cli.hpp"

#include <cstdlib>
#include <deque>
#include <exception>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/parallel.hpp"

namespace ratio_forge {

namespace cli {

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig config;
  if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0')
    apply_config_file(config, env);
  if (args.config) apply_config_file(config, *args.config);
  for (const auto& [key, text] : args.overrides) config.set(key, text);
  return config;
}

void apply_clip_flags(RunConfig& config, const CommonArgs& args, Method method) {
  std::string family = "clip.kpo";
  if (method == Method::kGrpo) family = "clip.grpo";
  if (method == Method::kSeqLevel) family = "clip.seq_level";
  if (args.eps_lo) config.set(family + ".eps_lo", *args.eps_lo);
  if (args.eps_hi) config.set(family + ".eps_hi", *args.eps_hi);
}

}  // namespace cli

namespace {

// Flag whose text is forwarded to a config key only when given.
struct Binding {
  std::string key;
  std::string text;
  CLI::Option* option = nullptr;
};

class Bindings {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help, bool numeric) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.option = app->add_option(flag, b.text, help);
    if (numeric) b.option->check(CLI::Number);
  }
  void collect(cli::CommonArgs& args) const {
    for (const Binding& b : items_)
      if (b.option->count() > 0) args.overrides.emplace_back(b.key, b.text);
  }

 private:
  std::deque<Binding> items_;
};

void add_config(CLI::App* app, cli::CommonArgs& args) {
  app->add_option("--config", args.config, "JSON config file (overrides $RATIO_FORGE_CONFIG)");
  app->add_option("--threads", args.threads, "worker threads; never changes output")
      ->check(CLI::PositiveNumber);
}

void add_kalman(CLI::App* app, Bindings& b) {
  b.add(app, "--q", "kalman.q", "process noise Q", true);
  b.add(app, "--v", "kalman.v", "observation noise V", true);
  b.add(app, "--p0", "kalman.p0", "prior variance", true);
  b.add(app, "--rho0", "kalman.rho0", "prior log-ratio mean", true);
}

void add_clip(CLI::App* app, cli::CommonArgs& args) {
  app->add_option("--eps-lo", args.eps_lo, "lower clip epsilon")->check(CLI::Number);
  app->add_option("--eps-hi", args.eps_hi, "upper clip epsilon")->check(CLI::Number);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kalman-filtered importance ratios: filtering, diagnostics, losses, toy training"};
  app.name("ratio_forge");
  app.require_subcommand(1);

  cli::CommonArgs args;
  args.threads = default_threads();
  Bindings bindings;

  CLI::App* filter = app.add_subcommand("filter", "filter per-token log-ratios of a trace file");
  filter->add_option("--input", args.input, "JSONL traces")->required();
  filter->add_option("--output", args.output, "JSONL traces with filtered columns")->required();
  add_config(filter, args);
  add_kalman(filter, bindings);

  CLI::App* analyze = app.add_subcommand("analyze", "off-policy structure statistics");
  analyze->add_option("--input", args.input, "JSONL traces, optionally with filtered columns")->required();
  analyze->add_option("--output", args.output, "report CSV")->required();
  add_config(analyze, args);
  add_clip(analyze, args);
  bindings.add(analyze, "--window", "diagnostics.window", "window length in tokens", true);
  bindings.add(analyze, "--kc", "diagnostics.kc", "low-frequency cutoff bin (default T/20)", true);
  bindings.add(analyze, "--band", "diagnostics.band", "on-policy band: clip | exact", false);
  bindings.add(analyze, "--representation", "diagnostics.representation",
               "series for LFR and variance: ratio | log_ratio", false);
  analyze->add_option("--plot", args.plot, "write PREFIX_window_freq.svg and PREFIX_ratio.svg");

  std::optional<std::string> loss_method;
  CLI::App* loss = app.add_subcommand("loss", "per-group surrogate objectives");
  loss->add_option("--input", args.input, "JSONL traces with scores")->required();
  loss->add_option("--output", args.output, "loss CSV")->required();
  add_config(loss, args);
  add_kalman(loss, bindings);
  add_clip(loss, args);
  loss->add_option("--method", loss_method,
                   "grpo | seq_level | kpo_clipped | kpo_unclipped (default: all)");
  bindings.add(loss, "--aggregation", "objective.aggregation",
               "seq_mean_token_mean | token_mean", false);

  std::optional<std::string> traces_path;
  CLI::App* simulate = app.add_subcommand("simulate", "train the toy policy");
  simulate->add_option("--output", args.output, "metrics CSV")->required();
  add_config(simulate, args);
  add_kalman(simulate, bindings);
  add_clip(simulate, args);
  bindings.add(simulate, "--method", "train.method", "grpo | seq_level | kpo_clipped | kpo_unclipped", false);
  bindings.add(simulate, "--steps", "train.steps", "training steps", true);
  bindings.add(simulate, "--seed", "train.seed", "master seed", true);
  bindings.add(simulate, "--lr", "train.learning_rate", "learning rate", true);
  bindings.add(simulate, "--gradient-mode", "train.gradient_mode", "through_filter | detached", false);
  simulate->add_option("--plot", args.plot, "write PREFIX_{reward,entropy,clip_fraction,pg_loss}.svg");
  simulate->add_option("--traces", traces_path, "dump the final step's minibatches as JSONL");

  std::vector<std::string> report_inputs;
  std::vector<std::string> report_labels;
  std::string report_output;
  CLI::App* report = app.add_subcommand("report", "combine report CSVs under run labels");
  report->add_option("inputs", report_inputs, "CSV files from analyze, loss or simulate")->required();
  report->add_option("--label", report_labels, "run label per input (default: file stem)");
  report->add_option("--output", report_output, "combined CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  bindings.collect(args);

  const cli::Streams io{out, err};
  try {
    if (filter->parsed()) return cli::cmd_filter(args, io);
    if (analyze->parsed()) return cli::cmd_analyze(args, io);
    if (loss->parsed()) return cli::cmd_loss(args, loss_method, io);
    if (simulate->parsed()) return cli::cmd_simulate(args, traces_path, io);
    if (report->parsed()) return cli::cmd_report(report_inputs, report_labels, report_output, io);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace ratio_forge
