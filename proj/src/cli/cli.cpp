/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"

#include "georoute/artifacts.hpp"
#include "georoute/cli.hpp"
#include "georoute/experiment.hpp"

namespace georoute {

namespace {

namespace fs = std::filesystem;

constexpr const char* kCheckpointFile = "checkpoint.galn";
constexpr const char* kLossFile = "loss.csv";
constexpr const char* kResultsFile = "results.csv";
constexpr const char* kRoutingFile = "routing.csv";
constexpr const char* kSummaryFile = "routing_summary.json";

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "georoute_out";
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "Overrides the config seed");
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
}

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig config = opts.config_path.empty() ? load_config("{}") : load_config_file(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  config.validate();
  return config;
}

fs::path output_dir(const CommonOptions& opts) {
  fs::path dir(opts.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory (" + ec.message() + ")");
  return dir;
}

fs::path checkpoint_path(const CommonOptions& opts) {
  return opts.checkpoint.empty() ? fs::path(opts.out_dir) / kCheckpointFile : fs::path(opts.checkpoint);
}

ToyModel load_model(const ExperimentConfig& config, const CommonOptions& opts) {
  ToyModel model = init_model(config.fusion(), config.backbone(), config.seed);
  restore_parameters(model.named_parameters(), load_checkpoint(checkpoint_path(opts)));
  return model;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_metrics(std::ostream& out, const std::string& name, const TaskMetrics& m) {
  out << name << ":";
  for (std::size_t t = 0; t < m.per_task_mse.size(); ++t) {
    out << " task" << t << "=" << (m.per_task_mse[t] ? fmt(*m.per_task_mse[t]) : "-");
  }
  out << " aggregate=" << fmt(m.aggregate) << "\n";
}

int cmd_gradcheck(const CommonOptions& opts, std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_gradient_suite(opts.seed.value_or(0))) {
    out << (r.passed ? "PASS " : "FAIL ") << r.op_name << " max_rel_error=" << fmt(r.max_rel_error) << "\n";
    ok = ok && r.passed;
  }
  out << (ok ? "gradient suite passed\n" : "gradient suite FAILED\n");
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_train(const CommonOptions& opts, std::ostream& out) {
  const ExperimentConfig config = resolve_config(opts);
  const fs::path dir = output_dir(opts);
  TrainedExperiment trained = train_experiment(config);
  save_checkpoint(dir / kCheckpointFile, trained.model.named_parameters());
  write_loss_csv(trained.log, dir / kLossFile);
  out << "trained " << to_string(config.variant) << " for " << trained.log.size() << " steps (seed " << config.seed
      << "), final loss " << fmt(trained.log.back().loss) << "\n";
  out << "wrote " << (dir / kCheckpointFile).string() << " and " << (dir / kLossFile).string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonOptions& opts, std::ostream& out) {
  const ExperimentConfig config = resolve_config(opts);
  ToyModel model = load_model(config, opts);
  const fs::path dir = output_dir(opts);
  const auto batches = eval_batches(config);
  EvalResult eval = evaluate(model, batches);

  AblationResults table;
  table.num_tasks = config.num_tasks;
  table.rows.push_back({std::string(to_string(config.variant)), eval.metrics, {}, {}, {}});
  write_results_table(table, dir / kResultsFile);
  print_metrics(out, table.rows[0].name, eval.metrics);
  out << "wrote " << (dir / kResultsFile).string() << "\n";
  if (!eval.plans.empty()) {
    write_routing_dump(eval.plans.front(), model.fusion.source_layers, dir / kRoutingFile, dir / kSummaryFile);
    std::vector<std::vector<std::size_t>> tasks;
    for (const auto& b : batches) tasks.push_back(b.task_of_token);
    out << "layer preference recovery "
        << fmt(layer_preference_recovery(eval.plans, tasks, model.fusion.source_layers, config.scene(),
                                         config.variant))
        << "\n";
    out << "wrote " << (dir / kRoutingFile).string() << " and " << (dir / kSummaryFile).string() << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const CommonOptions& opts, std::ostream& out) {
  const ExperimentConfig config = resolve_config(opts);
  const fs::path dir = output_dir(opts);
  const auto cells = variant_grid(config, config.grid);
  AblationResults results;
  results.num_tasks = config.num_tasks;
  for (const auto& cell : cells) {
    results.rows.push_back(run_cell(cell));
    print_metrics(out, results.rows.back().name, results.rows.back().metrics);
  }
  write_results_table(results, dir / kResultsFile);
  out << "wrote " << (dir / kResultsFile).string() << "\n";
  const OrderingVerdict verdict = ordering_verdict(results);
  if (!verdict.applicable) {
    out << verdict.detail << "\n";
    return kExitOk;
  }
  out << "ordering Dynamic < Mean < Single < TwoDOnly: " << (verdict.holds ? "HOLDS" : "VIOLATED") << " ("
      << verdict.detail << ")\n";
  return verdict.holds ? kExitOk : kExitCheckFailed;
}

int cmd_route_dump(const CommonOptions& opts, std::ostream& out) {
  ExperimentConfig config = resolve_config(opts);
  if (!uses_router(config.variant)) {
    throw ConfigError("variant", std::string(to_string(config.variant)) + " does not produce a routing plan");
  }
  ToyModel model = load_model(config, opts);
  const fs::path dir = output_dir(opts);
  config.eval_batches = 1;
  const auto batches = eval_batches(config);
  ModelOutput output = model_forward(model, batches.front());
  write_routing_dump(*output.plan, model.fusion.source_layers, dir / kRoutingFile, dir / kSummaryFile);
  out << "wrote " << (dir / kRoutingFile).string() << " and " << (dir / kSummaryFile).string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic multi-layer feature routing on a synthetic benchmark", "georoute"};
  app.require_subcommand(1);
  CommonOptions opts;

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of kernels and fusion pipelines");
  auto* train = app.add_subcommand("train", "Train one model; writes checkpoint and loss log");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; writes metrics and routing dump");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the configured variant grid");
  auto* route_dump = app.add_subcommand("route-dump", "Dump the routing plan of one evaluation batch");
  for (auto* cmd : {gradcheck, train, eval, ablate, route_dump}) add_common(cmd, opts);
  for (auto* cmd : {eval, route_dump}) {
    cmd->add_option("--checkpoint", opts.checkpoint, "Checkpoint to load (default: <out>/checkpoint.galn)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(opts, out);
    if (*train) return cmd_train(opts, out);
    if (*eval) return cmd_eval(opts, out);
    if (*ablate) return cmd_ablate(opts, out);
    return cmd_route_dump(opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace georoute
