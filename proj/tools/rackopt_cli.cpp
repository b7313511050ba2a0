// Copyright 2026 The rackopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rackopt/bench.hpp"
#include "rackopt/io.hpp"
#include "rackopt/oracle.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace rackopt;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 1;
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--seed", c.seed, "Seed override");
  app->add_option("--out", c.out, out_help);
  app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
}

io::Json load_config(const Common& c) { return c.config.empty() ? io::Json::object() : io::read_json(c.config); }

fs::path config_dir(const Common& c) { return c.config.empty() ? fs::path() : fs::path(c.config).parent_path(); }

void print_breakdown(const ObjectiveBreakdown& b, const std::string& format) {
  if (format == "json") {
    std::cout << io::breakdown_to_json(b).dump(2) << "\n";
    return;
  }
  std::cout << "movement,spread,penalty,placement_excess,objective\n"
            << io::format_double(b.movement) << "," << io::format_double(b.spread) << ","
            << io::format_double(b.limit_penalty) << "," << io::format_double(b.placement_excess) << ","
            << io::format_double(b.augmented) << "\n";
}

int run_generate(const Common& c, int count) {
  const io::Json j = load_config(c);
  GeneratorConfig cfg = io::config_from_json(j.contains("generator") ? j.at("generator") : j);
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  const fs::path out = c.out.empty() ? fs::path("instances") : fs::path(c.out);
  if (count == 1 && out.extension() == ".json") {
    io::save_instance(out, generate_instance(cfg, seed));
    std::cout << "wrote " << out.string() << "\n";
    return kOk;
  }
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.json", i);
    io::save_instance(out / name, generate_instance(cfg, batch_seed(seed, static_cast<std::uint64_t>(i))));
  }
  std::cout << "wrote " << count << " instances to " << out.string() << "\n";
  return kOk;
}

int run_solve(const Common& c, const std::string& instance_path, const std::string& order_text,
              const std::string& checkpoint) {
  const io::Json j = load_config(c);
  const ProblemInstance instance = io::load_instance(instance_path);
  HeuristicConfig heuristic = heuristic_from_json(j.contains("heuristic") ? j.at("heuristic") : j);
  if (c.seed) heuristic.tie_seed = *c.seed;
  std::vector<Index> order;
  Assignment assignment;
  ObjectiveBreakdown breakdown;
  if (!checkpoint.empty()) {
    InferenceResult r = infer_order(instance, io::load_checkpoint(checkpoint), heuristic);
    order = std::move(r.order);
    assignment = std::move(r.assignment);
    breakdown = r.breakdown;
  } else {
    order = order_text.empty() ? identity_order(instance.num_rack_types) : parse_order(order_text);
    if (!is_permutation_of_types(order, instance.num_rack_types)) {
      throw std::invalid_argument("--order is not a permutation of the rack types");
    }
    SolveResult r = solve_ordered(instance, order, heuristic);
    assignment = std::move(r.assignment);
    breakdown = r.breakdown;
  }
  if (!c.out.empty()) {
    const fs::path out(c.out);
    io::save_assignment(out / "assignment.json", assignment);
    io::write_json(out / "breakdown.json",
                   {{"order", order}, {"breakdown", io::breakdown_to_json(breakdown)}});
    io::write_text(out / "penalty_cells.csv", io::penalty_cells_csv(instance, assignment, heuristic.objective));
  }
  std::cerr << "order: " << format_order(order) << "\n";
  print_breakdown(breakdown, c.format);
  return kOk;
}

int run_train(const Common& c, std::optional<int> epochs) {
  TrainConfig cfg = train_config_from_json(load_config(c));
  if (c.seed) cfg.seed = *c.seed;
  if (epochs) cfg.epochs = *epochs;
  cfg.workers = c.workers;
  const fs::path out = c.out.empty() ? fs::path("train_out") : fs::path(c.out);
  const TrainResult result = train(cfg, [](const CurveRecord& r) {
    std::cerr << "epoch " << r.epoch << " mean_reward " << io::format_double(r.mean_reward) << " loss "
              << io::format_double(r.loss) << "\n";
  });
  io::save_checkpoint(out / "policy.bin", result.params);
  io::write_text(out / "curve.csv", io::curve_csv(result.curve));
  std::cout << "wrote " << (out / "policy.bin").string() << " after " << result.heuristic_solves
            << " heuristic solves\n";
  return kOk;
}

ExperimentConfig experiment_config(const Common& c) {
  ExperimentConfig cfg = experiment_from_json(load_config(c), config_dir(c));
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.workers = c.workers;
  return cfg;
}

int run_bench(const Common& c) {
  ExperimentConfig cfg = experiment_config(c);
  validate_experiment(cfg);
  const ExperimentResult result = run_experiment(cfg);
  write_experiment(cfg, experiment_instances(cfg), result);
  if (c.format == "csv") {
    std::cout << runs_csv(result.records);
  } else {
    std::cout << summary_json(cfg, result).dump(2) << "\n";
  }
  if (result.failures > 0) {
    std::cerr << result.failures << " of " << result.records.size() << " runs failed\n";
    return kPartialFailure;
  }
  return kOk;
}

int run_rank_analysis(const Common& c, int orders) {
  const io::Json j = load_config(c);
  const ExperimentConfig cfg = experiment_config(c);
  const HeuristicConfig heuristic = heuristic_from_json(j.contains("heuristic") ? j.at("heuristic") : io::Json());
  const RankTable table =
      ordering_rank_analysis(experiment_instances(cfg), orders, heuristic, cfg.seed, cfg.workers);
  const fs::path out = c.out.empty() ? fs::path("rank_out") : fs::path(c.out);
  io::write_text(out / "rank_analysis.csv", rank_table_csv(table));
  io::Json modal = io::Json::array();
  for (Index k = 0; k < table.num_types; ++k) {
    modal.push_back({{"rack_type", k + 1}, {"modal_position", table.modal_position(k) + 1}});
  }
  const io::Json summary = {{"seed", cfg.seed},
                            {"instances", table.instances},
                            {"orders_per_instance", table.orders_per_instance},
                            {"modal_positions", modal}};
  io::write_json(out / "rank_summary.json", summary);
  if (c.format == "json") {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << rank_table_csv(table);
  }
  return kOk;
}

int run_audit(const Common& c, const std::string& dir) {
  const fs::path target = dir.empty() ? fs::path(c.out) : fs::path(dir);
  if (target.empty()) throw std::invalid_argument("audit needs a results directory");
  const AuditReport report = audit_experiment(target);
  for (const auto& m : report.mismatches) std::cerr << m << "\n";
  std::cout << "audited " << report.checked << " records, " << report.mismatches.size() << " mismatches\n";
  return report.ok() ? kOk : kPartialFailure;
}

int run_oracle(const Common& c, const std::string& instance_path) {
  const io::Json j = load_config(c);
  const ProblemInstance instance = io::load_instance(instance_path);
  const HeuristicConfig heuristic = heuristic_from_json(j.contains("heuristic") ? j.at("heuristic") : j);
  const OracleResult opt = brute_force_solve(instance, heuristic.objective);
  io::Json report = {{"optimal_value", opt.optimal_value},
                     {"search_space_size", opt.search_space_size},
                     {"breakdown", io::breakdown_to_json(opt.optimal_breakdown)}};
  if (instance.num_rack_types <= 8) {
    const ExhaustiveResult ex = exhaustive_order_search(instance, heuristic);
    const SolveResult solved = solve_ordered(instance, ex.order, heuristic);
    report["heuristic_value"] = ex.breakdown.augmented;
    report["heuristic_order"] = ex.order;
    report["gap"] = optimality_gap(instance, solved.assignment, opt, heuristic.objective);
  }
  if (!c.out.empty()) {
    io::save_assignment(fs::path(c.out) / "optimal_assignment.json", opt.optimal_assignment);
    io::write_json(fs::path(c.out) / "oracle.json", report);
  }
  std::cout << report.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rack placement optimizer: instance generation, solving, policy training and benchmarks"};
  app.require_subcommand(1);
  Common common;

  auto* generate = app.add_subcommand("generate", "Generate problem instances");
  int count = 1;
  add_common(generate, common, "Output file (.json, single instance) or directory");
  generate->add_option("--count", count, "Number of instances")->check(CLI::PositiveNumber);

  auto* solve = app.add_subcommand("solve", "Solve one instance with the heuristic");
  std::string instance_path, order_text, checkpoint;
  add_common(solve, common, "Directory for assignment and breakdown files");
  solve->add_option("--instance", instance_path, "Instance JSON")->required();
  solve->add_option("--order", order_text, "Space-separated rack-type order (default identity)");
  solve->add_option("--checkpoint", checkpoint, "Policy checkpoint; chooses the order by inference");

  auto* train_cmd = app.add_subcommand("train", "Train the ordering policy");
  std::optional<int> epochs;
  add_common(train_cmd, common, "Directory for policy.bin and curve.csv");
  train_cmd->add_option("--epochs", epochs, "Epoch override");

  auto* bench = app.add_subcommand("bench", "Run an experiment over many instances");
  add_common(bench, common, "Results directory");

  auto* rank = app.add_subcommand("rank-analysis", "Tally top-3 order positions per rack type");
  int orders = 10;
  add_common(rank, common, "Results directory");
  rank->add_option("--orders", orders, "Sampled orders per instance")->check(CLI::Range(3, 1 << 20));

  auto* audit = app.add_subcommand("audit", "Recompute every record of a results directory");
  std::string audit_dir;
  add_common(audit, common, "Results directory to audit");
  audit->add_option("dir", audit_dir, "Results directory to audit");

  auto* oracle = app.add_subcommand("oracle", "Exact enumeration for a tiny instance");
  add_common(oracle, common, "Directory for the optimal assignment");
  oracle->add_option("--instance", instance_path, "Instance JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*generate) return run_generate(common, count);
    if (*solve) return run_solve(common, instance_path, order_text, checkpoint);
    if (*train_cmd) return run_train(common, epochs);
    if (*bench) return run_bench(common);
    if (*rank) return run_rank_analysis(common, orders);
    if (*audit) return run_audit(common, audit_dir);
    if (*oracle) return run_oracle(common, instance_path);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
  return kConfigError;
}
