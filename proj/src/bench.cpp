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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <map>
#include <set>
#include <sstream>

namespace rackopt {

namespace {

using io::Json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kAlgorithmStream = 0xa160;
constexpr std::uint64_t kRankStream = 0x4a2c;

const char* kind_name(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kFixedOrder: return "fixed";
    case AlgorithmKind::kRandomOrder: return "random";
    case AlgorithmKind::kExhaustive: return "exhaustive";
    case AlgorithmKind::kPolicy: return "policy";
  }
  return "unknown";
}

AlgorithmKind kind_from_name(const std::string& name) {
  if (name == "fixed") return AlgorithmKind::kFixedOrder;
  if (name == "random") return AlgorithmKind::kRandomOrder;
  if (name == "exhaustive") return AlgorithmKind::kExhaustive;
  if (name == "policy") return AlgorithmKind::kPolicy;
  throw std::invalid_argument("unknown algorithm kind '" + name + "'");
}

std::string padded(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", id);
  return buf;
}

std::string assignment_name(int instance_id, const std::string& algorithm) {
  return padded(instance_id) + "_" + algorithm + ".json";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct Solved {
  std::vector<Index> order;
  Assignment assignment;
  ObjectiveBreakdown breakdown;
};

Solved solve_with(const AlgorithmSpec& spec, const ProblemInstance& instance,
                  const std::optional<PolicyParams<float>>& policy, std::uint64_t random_seed) {
  switch (spec.kind) {
    case AlgorithmKind::kFixedOrder: {
      std::vector<Index> order = spec.order.empty() ? identity_order(instance.num_rack_types) : spec.order;
      SolveResult r = solve_ordered(instance, order, spec.heuristic);
      return {std::move(order), std::move(r.assignment), r.breakdown};
    }
    case AlgorithmKind::kRandomOrder: {
      const RandomOrderStats stats = random_order_baseline(instance, spec.samples, random_seed, spec.heuristic);
      const auto best = std::min_element(stats.objectives.begin(), stats.objectives.end()) -
                        stats.objectives.begin();
      const std::vector<Index>& order = stats.orders[best];
      SolveResult r = solve_ordered(instance, order, spec.heuristic);
      return {order, std::move(r.assignment), r.breakdown};
    }
    case AlgorithmKind::kExhaustive: {
      const ExhaustiveResult best = exhaustive_order_search(instance, spec.heuristic);
      SolveResult r = solve_ordered(instance, best.order, spec.heuristic);
      return {best.order, std::move(r.assignment), r.breakdown};
    }
    case AlgorithmKind::kPolicy: {
      InferenceResult r = infer_order(instance, *policy, spec.heuristic);
      return {std::move(r.order), std::move(r.assignment), r.breakdown};
    }
  }
  throw std::logic_error("unhandled algorithm kind");
}

}  // namespace

std::string format_order(const std::vector<Index>& order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(order[i]);
  }
  return out;
}

std::vector<Index> parse_order(const std::string& text) {
  std::vector<Index> out;
  std::istringstream ss(text);
  long long v;
  while (ss >> v) out.push_back(static_cast<Index>(v));
  if (!ss.eof()) throw std::invalid_argument("malformed order '" + text + "'");
  return out;
}

void validate_experiment(const ExperimentConfig& config) {
  if (config.algorithms.empty()) throw std::invalid_argument("experiment needs at least one algorithm");
  if (config.instance_files.empty() && config.num_instances < 1) {
    throw std::invalid_argument("num_instances must be positive");
  }
  std::set<std::string> ids;
  for (const AlgorithmSpec& a : config.algorithms) {
    if (a.id.empty() || a.id.find_first_of(",/\\ \n") != std::string::npos) {
      throw std::invalid_argument("algorithm id '" + a.id + "' is empty or has separators");
    }
    if (!ids.insert(a.id).second) throw std::invalid_argument("duplicate algorithm id '" + a.id + "'");
    if (a.kind == AlgorithmKind::kPolicy && !std::filesystem::exists(a.checkpoint)) {
      throw std::invalid_argument("checkpoint not found: " + a.checkpoint.string());
    }
    if (a.kind == AlgorithmKind::kRandomOrder && a.samples < 1) {
      throw std::invalid_argument("algorithm '" + a.id + "' needs samples >= 1");
    }
  }
  if (config.instance_files.empty()) {
    const auto problems = validate_config(config.generator);
    if (!problems.empty()) throw std::invalid_argument("generator config: " + problems.front());
  }
}

std::vector<ProblemInstance> experiment_instances(const ExperimentConfig& config) {
  std::vector<ProblemInstance> out;
  if (!config.instance_files.empty()) {
    for (const auto& path : config.instance_files) out.push_back(io::load_instance(path));
    return out;
  }
  for (int i = 0; i < config.num_instances; ++i) {
    out.push_back(generate_instance(config.generator, batch_seed(config.seed, static_cast<std::uint64_t>(i))));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_experiment(config);
  const auto started = Clock::now();
  const std::vector<ProblemInstance> instances = experiment_instances(config);

  std::vector<std::optional<PolicyParams<float>>> policies(config.algorithms.size());
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    if (config.algorithms[a].kind == AlgorithmKind::kPolicy) {
      policies[a] = io::load_checkpoint(config.algorithms[a].checkpoint);
    }
  }

  const std::size_t n_alg = config.algorithms.size();
  ExperimentResult result;
  result.records.resize(instances.size() * n_alg);
  const CounterRng streams = CounterRng(config.seed).split(kAlgorithmStream);
  parallel_for(result.records.size(), config.workers, [&](std::size_t task) {
    const std::size_t i = task / n_alg;
    const std::size_t a = task % n_alg;
    const ProblemInstance& instance = instances[i];
    const AlgorithmSpec& spec = config.algorithms[a];
    RunRecord& rec = result.records[task];
    rec.instance_id = static_cast<int>(i);
    rec.instance_seed = instance.seed.value_or(0);
    rec.algorithm = spec.id;
    const auto t0 = Clock::now();
    try {
      Solved s = solve_with(spec, instance, policies[a], streams.split(i).split(a)());
      rec.order = std::move(s.order);
      rec.assignment = std::move(s.assignment);
      rec.breakdown = s.breakdown;
    } catch (const std::exception& e) {
      // Keep the previous mapping: zero movement, scored as it stands.
      rec.success = false;
      rec.error = e.what();
      rec.order.clear();
      rec.assignment = instance.prior_assignment;
      rec.breakdown = total_utility(instance, rec.assignment, spec.heuristic.objective);
    }
    rec.duration_seconds =
        std::max(1e-9, std::chrono::duration<double>(Clock::now() - t0).count());
  });
  for (const RunRecord& r : result.records) result.failures += !r.success;
  result.total_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return result;
}

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::string out =
      "instance_id,instance_seed,algorithm,success,movement,spread,penalty,placement_excess,objective,order\n";
  for (const RunRecord& r : records) {
    const ObjectiveBreakdown& b = r.breakdown;
    out += std::to_string(r.instance_id) + "," + std::to_string(r.instance_seed) + "," + r.algorithm + "," +
           (r.success ? "1" : "0") + "," + io::format_double(b.movement) + "," + io::format_double(b.spread) +
           "," + io::format_double(b.limit_penalty) + "," + io::format_double(b.placement_excess) + "," +
           io::format_double(b.augmented) + "," + format_order(r.order) + "\n";
  }
  return out;
}

Json summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  Json algorithms = Json::array();
  for (const AlgorithmSpec& spec : config.algorithms) {
    std::vector<double> movement, spread, penalty, objective;
    int runs = 0, successes = 0;
    for (const RunRecord& r : result.records) {
      if (r.algorithm != spec.id) continue;
      ++runs;
      successes += r.success;
      movement.push_back(r.breakdown.movement);
      spread.push_back(r.breakdown.spread);
      penalty.push_back(r.breakdown.limit_penalty);
      objective.push_back(r.breakdown.augmented);
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    algorithms.push_back(
        {{"id", spec.id},
         {"kind", kind_name(spec.kind)},
         {"runs", runs},
         {"successes", successes},
         {"success_rate", runs ? static_cast<double>(successes) / runs : 0.0},
         {"mean", {{"movement", mean(movement)}, {"spread", mean(spread)}, {"penalty", mean(penalty)}, {"objective", mean(objective)}}},
         {"median", {{"movement", median(movement)}, {"spread", median(spread)}, {"penalty", median(penalty)}, {"objective", median(objective)}}}});
  }
  return {{"schema_version", io::kSchemaVersion},
          {"seed", config.seed},
          {"num_instances", result.records.size() / std::max<std::size_t>(1, config.algorithms.size())},
          {"failures", result.failures},
          {"algorithms", std::move(algorithms)}};
}

void write_experiment(const ExperimentConfig& config, const std::vector<ProblemInstance>& instances,
                      const ExperimentResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir = config.output_dir;
  fs::create_directories(dir / "instances");
  fs::create_directories(dir / "assignments");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    io::save_instance(dir / "instances" / (padded(static_cast<int>(i)) + ".json"), instances[i]);
  }
  Json runs = Json::array();
  for (const RunRecord& r : result.records) {
    io::save_assignment(dir / "assignments" / assignment_name(r.instance_id, r.algorithm), r.assignment);
    Json entry = {{"instance_id", r.instance_id}, {"algorithm", r.algorithm},
                  {"duration_seconds", r.duration_seconds}};
    if (!r.success) entry["error"] = r.error;
    runs.push_back(std::move(entry));
  }
  if (config.write_csv) io::write_text(dir / "runs.csv", runs_csv(result.records));
  if (config.write_json) io::write_json(dir / "summary.json", summary_json(config, result));
  io::write_json(dir / "metadata.json", {{"written_at", utc_now()},
                                         {"seed", config.seed},
                                         {"total_seconds", result.total_seconds},
                                         {"workers", config.workers},
                                         {"runs", std::move(runs)}});
}

Index RankTable::modal_position(Index type) const {
  Index best = 0;
  long best_count = -1;
  for (Index pos = 0; pos < num_types; ++pos) {
    const long c = count(type, pos, 0) + count(type, pos, 1) + count(type, pos, 2);
    if (c > best_count) {
      best = pos;
      best_count = c;
    }
  }
  return best;
}

RankTable ordering_rank_analysis(const std::vector<ProblemInstance>& instances, int orders_per_instance,
                                 const HeuristicConfig& heuristic, std::uint64_t seed, int workers) {
  if (orders_per_instance < 3) throw std::invalid_argument("rank analysis needs at least 3 orders per instance");
  if (instances.empty()) throw std::invalid_argument("rank analysis needs at least one instance");
  const Index K = instances.front().num_rack_types;
  for (const ProblemInstance& in : instances) {
    if (in.num_rack_types != K) throw std::invalid_argument("rank analysis instances must share |K|");
  }
  std::vector<RandomOrderStats> samples(instances.size());
  const CounterRng streams = CounterRng(seed).split(kRankStream);
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    samples[i] = random_order_baseline(instances[i], orders_per_instance, streams.split(i)(), heuristic);
  });

  RankTable table;
  table.num_types = K;
  table.counts.assign(static_cast<std::size_t>(K * K * 3), 0);
  table.instances = static_cast<int>(instances.size());
  table.orders_per_instance = orders_per_instance;
  for (const RandomOrderStats& s : samples) {
    std::vector<std::size_t> rank(s.objectives.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return s.objectives[a] < s.objectives[b]; });
    for (int r = 0; r < 3; ++r) {
      const std::vector<Index>& order = s.orders[rank[r]];
      for (Index pos = 0; pos < K; ++pos) {
        ++table.counts[static_cast<std::size_t>((order[pos] * K + pos) * 3 + r)];
      }
    }
  }
  return table;
}

std::string rank_table_csv(const RankTable& table) {
  std::string out = "rack_type,order_position,rank1,rank2,rank3\n";
  for (Index k = 0; k < table.num_types; ++k) {
    for (Index pos = 0; pos < table.num_types; ++pos) {
      out += std::to_string(k + 1) + "," + std::to_string(pos + 1) + "," + std::to_string(table.count(k, pos, 0)) +
             "," + std::to_string(table.count(k, pos, 1)) + "," + std::to_string(table.count(k, pos, 2)) + "\n";
    }
  }
  return out;
}

AuditReport audit_experiment(const std::filesystem::path& dir, double tolerance) {
  AuditReport report;
  std::istringstream csv(io::read_text(dir / "runs.csv"));
  std::string line;
  std::getline(csv, line);
  if (line.rfind("instance_id,", 0) != 0) throw io::ParseError("runs.csv: unexpected header");
  std::map<int, ProblemInstance> cache;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 10) throw io::ParseError("runs.csv: malformed row '" + line + "'");
    const int id = std::stoi(cells[0]);
    const std::string& alg = cells[2];
    auto it = cache.find(id);
    if (it == cache.end()) {
      it = cache.emplace(id, io::load_instance(dir / "instances" / (padded(id) + ".json"))).first;
    }
    const Assignment a = io::load_assignment(dir / "assignments" / assignment_name(id, alg));
    const ObjectiveBreakdown b = total_utility(it->second, a);
    const std::pair<const char*, double> checks[] = {{"movement", b.movement},
                                                     {"spread", b.spread},
                                                     {"penalty", b.limit_penalty},
                                                     {"placement_excess", b.placement_excess},
                                                     {"objective", b.augmented}};
    for (std::size_t c = 0; c < 5; ++c) {
      const double stored = std::stod(cells[4 + c]);
      if (!(std::abs(stored - checks[c].second) <= tolerance * std::max(1.0, std::abs(checks[c].second)))) {
        report.mismatches.push_back("instance " + std::to_string(id) + " " + alg + " " + checks[c].first +
                                    ": stored " + cells[4 + c] + ", recomputed " +
                                    io::format_double(checks[c].second));
      }
    }
    if (cells[3] == "1" && !check_constraints(it->second, a).g1_violations.empty()) {
      report.mismatches.push_back("instance " + std::to_string(id) + " " + alg + ": g1 violated");
    }
    ++report.checked;
  }
  return report;
}

HeuristicConfig heuristic_from_json(const Json& j) {
  HeuristicConfig c;
  if (j.is_null()) return c;
  if (j.contains("adjustment_rounds")) c.adjustment_rounds = j.at("adjustment_rounds").get<int>();
  if (j.contains("tie_break")) {
    const auto v = j.at("tie_break").get<std::string>();
    if (v == "lowest") c.tie_break = TieBreak::kLowestIndex;
    else if (v == "random") c.tie_break = TieBreak::kSeededRandom;
    else throw std::invalid_argument("tie_break must be 'lowest' or 'random'");
  }
  if (j.contains("tie_seed")) c.tie_seed = j.at("tie_seed").get<std::uint64_t>();
  if (j.contains("swap_acceptance")) {
    const auto v = j.at("swap_acceptance").get<std::string>();
    if (v == "revert") c.swap_acceptance = SwapAcceptance::kRevertWorsening;
    else if (v == "unconditional") c.swap_acceptance = SwapAcceptance::kUnconditional;
    else throw std::invalid_argument("swap_acceptance must be 'revert' or 'unconditional'");
  }
  if (j.contains("penalty")) {
    const auto v = j.at("penalty").get<std::string>();
    if (v == "softplus") c.objective.penalty = LimitPenalty::kSoftplus;
    else if (v == "hinge") c.objective.penalty = LimitPenalty::kHinge;
    else throw std::invalid_argument("penalty must be 'softplus' or 'hinge'");
  }
  if (c.adjustment_rounds < 0) throw std::invalid_argument("adjustment_rounds must be >= 0");
  return c;
}

Json heuristic_to_json(const HeuristicConfig& c) {
  return {{"adjustment_rounds", c.adjustment_rounds},
          {"tie_break", c.tie_break == TieBreak::kLowestIndex ? "lowest" : "random"},
          {"tie_seed", c.tie_seed},
          {"swap_acceptance", c.swap_acceptance == SwapAcceptance::kRevertWorsening ? "revert" : "unconditional"},
          {"penalty", c.objective.penalty == LimitPenalty::kSoftplus ? "softplus" : "hinge"}};
}

ExperimentConfig experiment_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw io::ParseError("experiment config: expected a JSON object");
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  try {
    ExperimentConfig c;
    if (j.contains("generator")) c.generator = io::config_from_json(j.at("generator"));
    if (j.contains("instances")) {
      for (const auto& p : j.at("instances")) c.instance_files.push_back(resolve(p.get<std::string>()));
    }
    if (j.contains("num_instances")) c.num_instances = j.at("num_instances").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("formats")) {
      const auto formats = j.at("formats").get<std::vector<std::string>>();
      c.write_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
      c.write_json = std::find(formats.begin(), formats.end(), "json") != formats.end();
    }
    const Json algorithms = j.contains("algorithms")
                                ? j.at("algorithms")
                                : Json::array({{{"id", "heuristic"}, {"kind", "fixed"}}});
    for (const Json& a : algorithms) {
      AlgorithmSpec spec;
      spec.kind = kind_from_name(a.value("kind", std::string("fixed")));
      spec.id = a.value("id", std::string(kind_name(spec.kind)));
      spec.heuristic = heuristic_from_json(a.value("heuristic", Json()));
      if (a.contains("order")) spec.order = a.at("order").get<std::vector<Index>>();
      spec.samples = a.value("samples", 1);
      if (a.contains("checkpoint")) spec.checkpoint = resolve(a.at("checkpoint").get<std::string>());
      c.algorithms.push_back(std::move(spec));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw io::ParseError(std::string("experiment config: ") + e.what());
  }
}

TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) throw io::ParseError("train config: expected a JSON object");
  try {
    TrainConfig c;
    if (j.contains("generator")) c.generator = io::config_from_json(j.at("generator"));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.leader_weight = j.value("leader_weight", c.leader_weight);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("heuristic")) c.heuristic = heuristic_from_json(j.at("heuristic"));
    if (j.contains("policy")) {
      const Json& h = j.at("policy");
      c.hyper.d_model = h.value("d_model", c.hyper.d_model);
      c.hyper.heads = h.value("heads", c.hyper.heads);
      c.hyper.layers = h.value("layers", c.hyper.layers);
      c.hyper.ff_width = h.value("ff_width", c.hyper.ff_width);
      c.hyper.logit_clip = h.value("logit_clip", c.hyper.logit_clip);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw io::ParseError(std::string("train config: ") + e.what());
  }
}

}  // namespace rackopt
