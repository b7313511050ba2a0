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

#pragma once

#include "rackopt/heuristic.hpp"
#include "rackopt/instgen.hpp"
#include "rackopt/io.hpp"
#include "rackopt/ordering.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rackopt {

enum class AlgorithmKind {
  kFixedOrder,   // heuristic over a given order (identity by default)
  kRandomOrder,  // best of `samples` uniform random orders
  kExhaustive,   // best of all |K|! orders
  kPolicy,       // infer_order with a trained checkpoint
};

struct AlgorithmSpec {
  std::string id;
  AlgorithmKind kind = AlgorithmKind::kFixedOrder;
  HeuristicConfig heuristic;
  std::vector<Index> order;
  int samples = 1;
  std::filesystem::path checkpoint;
};

struct ExperimentConfig {
  GeneratorConfig generator = default_config();
  /// When non-empty, instances are loaded from these files instead of
  /// generated.
  std::vector<std::filesystem::path> instance_files;
  int num_instances = 80;
  std::uint64_t seed = 0;
  std::vector<AlgorithmSpec> algorithms;
  std::filesystem::path output_dir = "bench_out";
  bool write_csv = true;
  bool write_json = true;
  int workers = 1;
};

struct RunRecord {
  int instance_id = 0;
  std::uint64_t instance_seed = 0;
  std::string algorithm;
  ObjectiveBreakdown breakdown;
  double duration_seconds = 0.0;
  std::vector<Index> order;
  bool success = true;
  std::string error;
  Assignment assignment;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // instance-major, then algorithm order
  double total_seconds = 0.0;
  int failures = 0;
};

/// Throws std::invalid_argument on an empty algorithm list, duplicate ids,
/// missing checkpoints or a non-positive instance count.
void validate_experiment(const ExperimentConfig& config);

/// Solves every (instance, algorithm) pair. A failed run keeps the prior
/// mapping, is scored on it and is marked success = false.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes instances/, assignments/, runs.csv, summary.json and
/// metadata.json (the only file holding timings) under output_dir.
void write_experiment(const ExperimentConfig& config, const std::vector<ProblemInstance>& instances,
                      const ExperimentResult& result);

/// Instances in experiment order (generated or loaded).
std::vector<ProblemInstance> experiment_instances(const ExperimentConfig& config);

/// instance_id,instance_seed,algorithm,success,movement,spread,penalty,
/// placement_excess,objective,order
std::string runs_csv(const std::vector<RunRecord>& records);
io::Json summary_json(const ExperimentConfig& config, const ExperimentResult& result);

struct RankTable {
  Index num_types = 0;
  /// counts[(k * |K| + position) * 3 + rank] with 0-based position and rank.
  std::vector<long> counts;
  int instances = 0;
  int orders_per_instance = 0;

  long count(Index type, Index position, int rank) const {
    return counts[static_cast<std::size_t>((type * num_types + position) * 3 + rank)];
  }
  /// Position (0-based) holding the most top-3 appearances of `type`.
  Index modal_position(Index type) const;
};

/// Samples `orders_per_instance` orders per instance, ranks them by
/// objective (ties by sample index) and, for each of the top three, tallies
/// the position of every type.
RankTable ordering_rank_analysis(const std::vector<ProblemInstance>& instances, int orders_per_instance,
                                 const HeuristicConfig& heuristic, std::uint64_t seed, int workers = 1);

/// rack_type,order_position,rank1,rank2,rank3 (1-based type and position).
std::string rank_table_csv(const RankTable& table);

struct AuditReport {
  int checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};

/// Recomputes every record of an experiment directory from its stored
/// instance and assignment; metrics must agree within 1e-9.
AuditReport audit_experiment(const std::filesystem::path& dir, double tolerance = 1e-9);

// JSON forms used by the command-line configs.
HeuristicConfig heuristic_from_json(const io::Json& j);
io::Json heuristic_to_json(const HeuristicConfig& config);
ExperimentConfig experiment_from_json(const io::Json& j, const std::filesystem::path& base_dir = {});
TrainConfig train_config_from_json(const io::Json& j);

std::string format_order(const std::vector<Index>& order);
std::vector<Index> parse_order(const std::string& text);

}  // namespace rackopt
