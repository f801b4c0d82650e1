#include <map>
#include <numeric>
#include <string>

#include "cli_common.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/parallel.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge::cli {

namespace {

struct Group {
  std::string id;
  Minibatch batch;
  bool degenerate = false;
};

struct Row {
  double loss = 0.0;
  double clip_fraction = 0.0;
};

std::size_t tokens_of(const Minibatch& b) {
  std::size_t n = 0;
  for (const Rollout& r : b.rollouts) n += r.trace.valid_count();
  return n;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// Columns: scope, group_id, method, responses, tokens, degenerate, advantage_mean,
// loss, clip_fraction. Group rows flag a zero-spread group with degenerate = 1;
// the batch row counts such groups.
int cmd_loss(const CommonArgs& args, const std::optional<std::string>& method, Streams io) {
  const RunConfig base = resolve_config(args);
  std::vector<Method> methods;
  if (method && *method != "all")
    methods.push_back(parse_method(*method));
  else
    methods = {Method::kGrpo, Method::kSeqLevel, Method::kKpoClipped, Method::kKpoUnclipped};

  std::vector<TokenTrace> traces = read_traces(args.input);
  if (traces.empty()) throw InputError(args.input + ": no traces");

  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (TokenTrace& t : traces) {
    auto [it, fresh] = index.try_emplace(t.group_id, groups.size());
    if (fresh) groups.push_back({t.group_id, {}, false});
    groups[it->second].batch.rollouts.push_back({0, std::move(t)});
  }
  Minibatch all;
  std::size_t degenerate_groups = 0;
  for (Group& g : groups) {
    if (g.batch.rollouts.size() < 2)
      throw InputError("group '" + g.id + "' has " + std::to_string(g.batch.rollouts.size()) +
                       " response(s); at least 2 are required");
    std::vector<double> scores;
    for (const Rollout& r : g.batch.rollouts) scores.push_back(r.trace.score);
    const AdvantageSet adv = group_relative_advantage(scores);
    g.batch.advantages = adv.per_response;
    g.degenerate = adv.degenerate;
    degenerate_groups += adv.degenerate ? 1 : 0;
    all.rollouts.insert(all.rollouts.end(), g.batch.rollouts.begin(), g.batch.rollouts.end());
    all.advantages.insert(all.advantages.end(), adv.per_response.begin(), adv.per_response.end());
  }

  CsvTable table;
  table.header = {"scope",      "group_id",       "method", "responses",    "tokens",
                  "degenerate", "advantage_mean", "loss",   "clip_fraction"};
  for (Method m : methods) {
    RunConfig config = base;
    apply_clip_flags(config, args, m);
    ObjectiveSettings settings;
    settings.method = m;
    settings.clip = config.clip_for(m);
    settings.kalman = config.kalman_for(m);
    settings.aggregation = config.aggregation;
    settings.saturation_bound = config.saturation_bound;

    std::vector<Row> rows(groups.size());
    parallel_for(groups.size(), args.threads, [&](std::size_t i) {
      const ObjectiveReport r = evaluate_objective(groups[i].batch, settings);
      rows[i] = {r.loss, r.clip_fraction};
    });
    const std::string name(to_string(m));
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const Group& g = groups[i];
      table.rows.push_back({"group", g.id, name, std::to_string(g.batch.rollouts.size()),
                            std::to_string(tokens_of(g.batch)), g.degenerate ? "1" : "0",
                            format_number(mean_of(g.batch.advantages)), format_number(rows[i].loss),
                            format_number(rows[i].clip_fraction)});
    }
    const ObjectiveReport r = evaluate_objective(all, settings);
    table.rows.push_back({"batch", "", name, std::to_string(all.rollouts.size()),
                          std::to_string(tokens_of(all)), std::to_string(degenerate_groups),
                          format_number(mean_of(all.advantages)), format_number(r.loss),
                          format_number(r.clip_fraction)});
    io.out << name << ": loss=" << format_number(r.loss)
           << " clip_fraction=" << format_number(r.clip_fraction) << '\n';
  }
  write_csv(args.output, table);
  return 0;
}

}  // namespace ratio_forge::cli
