#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ratio_forge/config.hpp"
#include "ratio_forge/toy_sim.hpp"

namespace ratio_forge::cli {

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct CommonArgs {
  std::string input;
  std::string output;
  std::optional<std::string> config;
  std::vector<std::pair<std::string, std::string>> overrides;  // config key, flag text
  std::optional<std::string> eps_lo;
  std::optional<std::string> eps_hi;
  std::optional<std::string> plot;  // SVG path prefix
  unsigned threads = 1;
};

// defaults < $RATIO_FORGE_CONFIG < --config < flags. The clip flags are not
// applied here because their target depends on the method.
RunConfig resolve_config(const CommonArgs& args);

// Routes --eps-lo / --eps-hi to the clip settings used by `method`.
void apply_clip_flags(RunConfig& config, const CommonArgs& args, Method method);

int cmd_filter(const CommonArgs& args, Streams io);
int cmd_analyze(const CommonArgs& args, Streams io);
int cmd_loss(const CommonArgs& args, const std::optional<std::string>& method, Streams io);
int cmd_simulate(const CommonArgs& args, const std::optional<std::string>& traces, Streams io);
int cmd_report(const std::vector<std::string>& inputs, const std::vector<std::string>& labels,
               const std::string& output, Streams io);

}  // namespace ratio_forge::cli
