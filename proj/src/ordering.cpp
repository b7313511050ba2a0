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

#include "rackopt/ordering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace rackopt {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kDecodeStream = 0xdec0;

template <typename Scalar>
PolicyWeights<PolicyMatrix<Scalar>> zeros_like(const PolicyParams<Scalar>& params) {
  return params.weights.template map<PolicyMatrix<Scalar>>([](const PolicyMatrix<Scalar>& m) {
    return PolicyMatrix<Scalar>::Zero(m.rows(), m.cols()).eval();
  });
}

// Sum of log-probabilities of `order` under the graph's policy.
template <typename Scalar>
typename Tape<Scalar>::Var score_trajectory(PolicyGraph<Scalar>& graph,
                                            const std::vector<Index>& order, bool multi_start) {
  auto& tape = graph.tape();
  const std::size_t types = order.size();
  std::vector<char> selected(types, 0);
  std::vector<typename Tape<Scalar>::Var> picks;
  Index last = -1;
  std::size_t step = 0;
  if (multi_start) {
    selected[order[0]] = 1;
    last = order[0];
    step = 1;
  }
  for (; step < types; ++step) {
    auto log_probs = graph.step_log_probs(last, selected);
    picks.push_back(tape.element(log_probs, 0, order[step]));
    selected[order[step]] = 1;
    last = order[step];
  }
  if (picks.empty()) return tape.constant(PolicyMatrix<Scalar>::Zero(1, 1));
  const std::vector<Scalar> ones(picks.size(), Scalar(1));
  return tape.weighted_sum(picks, ones);
}

}  // namespace

TypeFeatures featurize(const ProblemInstance& instance) {
  const Index K = instance.num_rack_types;
  const Eigen::VectorXi current = type_counts(instance.prior_assignment);
  const double positions = std::max<double>(1.0, static_cast<double>(instance.num_positions));
  const double denominator = std::max<double>(
      1.0, static_cast<double>(instance.num_resources + instance.spread_requirements.size()));
  TypeFeatures f;
  f.values.resize(K, 2);
  for (Index k = 0; k < K; ++k) {
    int groups = 0;
    for (const SpreadRequirement& req : instance.spread_requirements) {
      groups += std::find(req.rack_group.begin(), req.rack_group.end(), k) != req.rack_group.end();
    }
    f.values(k, 0) = static_cast<double>(instance.demands[k] - current[k]) / positions;
    f.values(k, 1) = (instance.resource_matrix.row(k).sum() + groups) / denominator;
  }
  return f;
}

template <typename Scalar>
Encoding<Scalar> encode(const TypeFeatures& features, const PolicyParams<Scalar>& params) {
  PolicyGraph<Scalar> graph(params);
  graph.encode(features.values.cast<Scalar>());
  return {graph.tape().value(graph.embeddings()), graph.tape().value(graph.graph_embedding())};
}

template <typename Scalar>
std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures& features,
                                              const PolicyParams<Scalar>& params,
                                              const DecodeOptions& options) {
  const Index K = features.values.rows();
  if (K < 1) throw std::invalid_argument("no rack types to decode");
  if (options.n_traj < 1) throw std::invalid_argument("n_traj must be positive");
  if (options.multi_start && options.n_traj != K) {
    throw std::invalid_argument("multi-start decoding needs n_traj == |K|");
  }
  PolicyGraph<Scalar> graph(params);
  graph.encode(features.values.cast<Scalar>());
  auto& tape = graph.tape();

  std::vector<DecodedTrajectory> out(static_cast<std::size_t>(options.n_traj));
  for (int j = 0; j < options.n_traj; ++j) {
    CounterRng rng = CounterRng(options.seed).split(static_cast<std::uint64_t>(j));
    DecodedTrajectory& traj = out[j];
    std::vector<char> selected(static_cast<std::size_t>(K), 0);
    Index last = -1;
    if (options.multi_start) {
      selected[j] = 1;
      last = j;
      traj.order.push_back(j);
    }
    while (static_cast<Index>(traj.order.size()) < K) {
      const auto row = tape.value(graph.step_log_probs(last, selected));
      // Renormalize in double so the distribution sums to one tightly even
      // for single-precision weights.
      const Eigen::VectorXd log_p = row.row(0).transpose().template cast<double>();
      double peak = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < K; ++k) {
        if (!selected[k]) peak = std::max(peak, log_p[k]);
      }
      Eigen::VectorXd probs = Eigen::VectorXd::Zero(K);
      for (Index k = 0; k < K; ++k) {
        if (!selected[k]) probs[k] = std::exp(log_p[k] - peak);
      }
      probs /= probs.sum();

      Index choice = -1;
      if (options.mode == DecodeMode::kGreedy) {
        for (Index k = 0; k < K; ++k) {
          if (!selected[k] && (choice < 0 || probs[k] > probs[choice])) choice = k;
        }
      } else {
        const double u = rng.uniform();
        double cumulative = 0.0;
        for (Index k = 0; k < K; ++k) {
          if (selected[k]) continue;
          choice = k;
          cumulative += probs[k];
          if (u < cumulative) break;
        }
      }
      traj.log_prob += log_p[choice];
      traj.step_probabilities.push_back(std::move(probs));
      traj.order.push_back(choice);
      selected[choice] = 1;
      last = choice;
    }
  }
  return out;
}

double reward(const ProblemInstance& instance, const Assignment& assignment,
              const ObjectiveOptions& options) {
  return -total_utility(instance, assignment, options).augmented;
}

void assign_baseline(InstanceRollout& rollout) {
  if (rollout.trajectories.empty()) {
    rollout.baseline = 0.0;
    return;
  }
  double total = 0.0;
  for (const Trajectory& t : rollout.trajectories) total += t.reward;
  rollout.baseline = total / static_cast<double>(rollout.trajectories.size());
}

std::vector<double> advantages(const InstanceRollout& rollout, double leader_weight) {
  std::vector<double> out;
  out.reserve(rollout.trajectories.size());
  std::size_t leader = 0;
  for (std::size_t j = 0; j < rollout.trajectories.size(); ++j) {
    out.push_back(rollout.trajectories[j].reward - rollout.baseline);
    if (rollout.trajectories[j].reward > rollout.trajectories[leader].reward) leader = j;
  }
  if (!out.empty()) out[leader] *= leader_weight;
  return out;
}

template <typename Scalar>
SurrogateGradient<Scalar> surrogate_gradient(const RolloutBatch& batch,
                                             const PolicyParams<Scalar>& params,
                                             double leader_weight) {
  SurrogateGradient<Scalar> result{0.0, zeros_like(params)};
  const double batch_size = static_cast<double>(batch.instances.size());
  for (const InstanceRollout& rollout : batch.instances) {
    if (rollout.trajectories.empty()) continue;
    const std::vector<double> adv = advantages(rollout, leader_weight);
    const double n = static_cast<double>(rollout.trajectories.size());

    PolicyGraph<Scalar> graph(params);
    graph.encode(rollout.features.values.cast<Scalar>());
    std::vector<typename Tape<Scalar>::Var> scores;
    std::vector<Scalar> weights;
    for (std::size_t j = 0; j < rollout.trajectories.size(); ++j) {
      scores.push_back(score_trajectory(graph, rollout.trajectories[j].order, rollout.multi_start));
      weights.push_back(static_cast<Scalar>(-adv[j] / (batch_size * n)));
    }
    auto& tape = graph.tape();
    auto root = tape.weighted_sum(scores, weights);
    result.loss += static_cast<double>(tape.value(root)(0, 0));
    if (std::all_of(weights.begin(), weights.end(), [](Scalar w) { return w == Scalar(0); })) continue;
    tape.backward(root);
    auto grads = result.gradient.tensors();
    auto handles = graph.weights().tensors();
    for (std::size_t i = 0; i < grads.size(); ++i) *grads[i] += tape.grad(*handles[i]);
  }
  return result;
}

template <typename Scalar>
AdamOptimizer<Scalar>::AdamOptimizer(const PolicyParams<Scalar>& params, double learning_rate,
                                     double beta1, double beta2, double epsilon)
    : learning_rate_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      first_(zeros_like(params)),
      second_(zeros_like(params)) {}

template <typename Scalar>
void AdamOptimizer<Scalar>::step(PolicyParams<Scalar>& params,
                                 const PolicyWeights<PolicyMatrix<Scalar>>& gradient) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto w = params.weights.tensors();
  auto g = gradient.tensors();
  auto m = first_.tensors();
  auto v = second_.tensors();
  const Scalar b1 = static_cast<Scalar>(beta1_);
  const Scalar b2 = static_cast<Scalar>(beta2_);
  const Scalar lr = static_cast<Scalar>(learning_rate_);
  const Scalar eps = static_cast<Scalar>(epsilon_);
  const Scalar inv_c1 = static_cast<Scalar>(1.0 / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    *m[i] = b1 * *m[i] + (Scalar(1) - b1) * *g[i];
    *v[i] = b2 * *v[i] + (Scalar(1) - b2) * g[i]->cwiseProduct(*g[i]);
    w[i]->array() -=
        lr * (m[i]->array() * inv_c1) / ((v[i]->array() * inv_c2).sqrt() + eps);
  }
}

template <typename Scalar>
StepReport policy_gradient_step(const RolloutBatch& batch, PolicyParams<Scalar>& params,
                                AdamOptimizer<Scalar>& optimizer, double leader_weight) {
  if (!(leader_weight >= 1.0)) throw std::invalid_argument("leader_weight must be >= 1");
  SurrogateGradient<Scalar> sg = surrogate_gradient(batch, params, leader_weight);
  double squared = 0.0;
  for (const auto* g : sg.gradient.tensors()) {
    if (!g->allFinite()) throw std::runtime_error("policy gradient is not finite; step skipped");
    squared += static_cast<double>(g->squaredNorm());
  }
  optimizer.step(params, sg.gradient);
  return {sg.loss, std::sqrt(squared)};
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

TrainResult train(const TrainConfig& config, const std::function<void(const CurveRecord&)>& on_epoch) {
  if (config.epochs < 0 || config.batch_size < 1) throw std::invalid_argument("bad training size");
  const CounterRng root(config.seed);
  TrainResult result;
  result.params = init_policy<float>(config.hyper, root.split(kInitStream)());
  AdamOptimizer<float> optimizer(result.params, config.learning_rate);
  const Index K = config.generator.num_rack_types;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    RolloutBatch batch;
    batch.instances.resize(static_cast<std::size_t>(config.batch_size));
    std::vector<ProblemInstance> instances;
    for (int i = 0; i < config.batch_size; ++i) {
      const std::uint64_t index = static_cast<std::uint64_t>(epoch - 1) * config.batch_size + i;
      try {
        instances.push_back(generate_instance(config.generator, batch_seed(config.seed, index)));
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + " instance " +
                                 std::to_string(i) + ": " + e.what());
      }
      InstanceRollout& rollout = batch.instances[i];
      rollout.features = featurize(instances.back());
      const DecodeOptions decode{static_cast<int>(K), true, DecodeMode::kSample,
                                 root.split(kDecodeStream).split(index)()};
      for (DecodedTrajectory& d : decode_rollout(rollout.features, result.params, decode)) {
        rollout.trajectories.push_back({std::move(d.order), d.log_prob, 0.0});
      }
    }

    const std::size_t per_instance = static_cast<std::size_t>(K);
    parallel_for(instances.size() * per_instance, config.workers, [&](std::size_t task) {
      const std::size_t i = task / per_instance;
      Trajectory& traj = batch.instances[i].trajectories[task % per_instance];
      try {
        traj.reward = reward(solve_ordered(instances[i], traj.order, config.heuristic).breakdown);
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + " instance " +
                                 std::to_string(i) + ": " + e.what());
      }
    });
    result.heuristic_solves += static_cast<long>(instances.size() * per_instance);

    double reward_sum = 0.0;
    for (InstanceRollout& rollout : batch.instances) {
      assign_baseline(rollout);
      reward_sum += rollout.baseline;
    }
    const StepReport step = policy_gradient_step(batch, result.params, optimizer, config.leader_weight);
    CurveRecord record{epoch, reward_sum / static_cast<double>(batch.instances.size()), step.loss};
    result.curve.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

InferenceResult infer_order(const ProblemInstance& instance, const PolicyParams<float>& params,
                            const HeuristicConfig& heuristic) {
  const TypeFeatures features = featurize(instance);
  const Index K = instance.num_rack_types;
  const DecodeOptions decode{static_cast<int>(K), true, DecodeMode::kGreedy, 0};
  InferenceResult result;
  bool found = false;
  for (DecodedTrajectory& d : decode_rollout(features, params, decode)) {
    OrderEvaluation eval;
    eval.order = std::move(d.order);
    try {
      SolveResult solved = solve_ordered(instance, eval.order, heuristic);
      eval.breakdown = solved.breakdown;
      if (!found || reward(solved.breakdown) > reward(result.breakdown)) {
        result.order = eval.order;
        result.assignment = std::move(solved.assignment);
        result.breakdown = solved.breakdown;
        found = true;
      }
    } catch (const InfeasibleDemandError&) {
      eval.feasible = false;
    }
    result.candidates.push_back(std::move(eval));
  }
  if (!found) throw std::runtime_error("no decoded order is feasible");
  return result;
}

ExhaustiveResult exhaustive_order_search(const ProblemInstance& instance,
                                         const HeuristicConfig& heuristic) {
  const Index K = instance.num_rack_types;
  if (K > 8) throw std::invalid_argument("exhaustive order search supports at most 8 rack types");
  std::vector<Index> order = identity_order(K);
  ExhaustiveResult best;
  bool found = false;
  std::exception_ptr last_failure;
  do {
    ++best.evaluated;
    try {
      const SolveResult solved = solve_ordered(instance, order, heuristic);
      if (!found || solved.breakdown.augmented < best.breakdown.augmented) {
        best.order = order;
        best.breakdown = solved.breakdown;
        found = true;
      }
    } catch (const InfeasibleDemandError&) {
      ++best.infeasible;
      last_failure = std::current_exception();
    }
  } while (std::next_permutation(order.begin(), order.end()));
  if (!found) std::rethrow_exception(last_failure);
  return best;
}

RandomOrderStats random_order_baseline(const ProblemInstance& instance, int n_samples,
                                       std::uint64_t seed, const HeuristicConfig& heuristic) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  CounterRng rng(seed);
  RandomOrderStats stats;
  for (int s = 0; s < n_samples; ++s) {
    std::vector<Index> order = identity_order(instance.num_rack_types);
    rng.shuffle(std::span<Index>(order));
    const double f = solve_ordered(instance, order, heuristic).breakdown.augmented;
    stats.objectives.push_back(f);
    stats.orders.push_back(std::move(order));
  }
  stats.min = *std::min_element(stats.objectives.begin(), stats.objectives.end());
  stats.max = *std::max_element(stats.objectives.begin(), stats.objectives.end());
  stats.mean = std::accumulate(stats.objectives.begin(), stats.objectives.end(), 0.0) /
               static_cast<double>(n_samples);
  return stats;
}

template Encoding<float> encode(const TypeFeatures&, const PolicyParams<float>&);
template Encoding<double> encode(const TypeFeatures&, const PolicyParams<double>&);
template std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures&, const PolicyParams<float>&,
                                                       const DecodeOptions&);
template std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures&, const PolicyParams<double>&,
                                                       const DecodeOptions&);
template SurrogateGradient<float> surrogate_gradient(const RolloutBatch&, const PolicyParams<float>&,
                                                     double);
template SurrogateGradient<double> surrogate_gradient(const RolloutBatch&,
                                                      const PolicyParams<double>&, double);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;
template StepReport policy_gradient_step(const RolloutBatch&, PolicyParams<float>&,
                                         AdamOptimizer<float>&, double);
template StepReport policy_gradient_step(const RolloutBatch&, PolicyParams<double>&,
                                         AdamOptimizer<double>&, double);

}  // namespace rackopt
