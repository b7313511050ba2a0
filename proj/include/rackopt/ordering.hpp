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

#include "rackopt/core_model.hpp"
#include "rackopt/heuristic.hpp"
#include "rackopt/instgen.hpp"
#include "rackopt/objective.hpp"
#include "rackopt/policy.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rackopt {

/// Two encoder inputs per rack type, |K| x 2:
///   a_k = (d_k - current_count_k) / |P|
///   b_k = (sum_r R[k, r] + #requirements whose group holds k) / (|R| + |I|)
struct TypeFeatures {
  Eigen::MatrixXd values;
};

TypeFeatures featurize(const ProblemInstance& instance);

template <typename Scalar>
struct Encoding {
  PolicyMatrix<Scalar> embeddings;  // |K| x d_model
  PolicyMatrix<Scalar> graph;       // 1 x d_model, mean of the rows above
};

template <typename Scalar>
Encoding<Scalar> encode(const TypeFeatures& features, const PolicyParams<Scalar>& params);

enum class DecodeMode { kSample, kGreedy };

struct DecodeOptions {
  int n_traj = 1;
  /// Trajectory j starts at type j (requires n_traj == |K|); the forced
  /// first step contributes no log-probability.
  bool multi_start = false;
  DecodeMode mode = DecodeMode::kGreedy;
  std::uint64_t seed = 0;
};

struct DecodedTrajectory {
  std::vector<Index> order;
  double log_prob = 0.0;
  /// Distribution over all |K| types at every decoded step (forced steps
  /// excluded); already selected types have probability exactly 0.
  std::vector<Eigen::VectorXd> step_probabilities;
};

template <typename Scalar>
std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures& features,
                                              const PolicyParams<Scalar>& params,
                                              const DecodeOptions& options);

/// -f(X): higher is better.
double reward(const ProblemInstance& instance, const Assignment& assignment,
              const ObjectiveOptions& options = {});
inline double reward(const ObjectiveBreakdown& breakdown) { return -breakdown.augmented; }

struct Trajectory {
  std::vector<Index> order;
  double log_prob = 0.0;
  double reward = 0.0;
};

struct InstanceRollout {
  TypeFeatures features;
  std::vector<Trajectory> trajectories;
  /// Mean reward of the trajectories.
  double baseline = 0.0;
  bool multi_start = true;
};

struct RolloutBatch {
  std::vector<InstanceRollout> instances;
};

/// Sets `baseline` to the mean trajectory reward.
void assign_baseline(InstanceRollout& rollout);

/// reward - baseline per trajectory; the first best trajectory (the leader)
/// has its advantage multiplied by leader_weight.
std::vector<double> advantages(const InstanceRollout& rollout, double leader_weight);

template <typename Scalar>
struct SurrogateGradient {
  /// -(1 / (B N)) sum_ij A_ij log p(tau_ij)
  double loss = 0.0;
  PolicyWeights<PolicyMatrix<Scalar>> gradient;  // d loss / d weights
};

/// Re-scores every stored trajectory under `params` and differentiates the
/// surrogate loss. Ascending J is descending this loss.
template <typename Scalar>
SurrogateGradient<Scalar> surrogate_gradient(const RolloutBatch& batch,
                                             const PolicyParams<Scalar>& params,
                                             double leader_weight);

/// Adaptive-moment first-order optimizer over a PolicyParams layout.
template <typename Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(const PolicyParams<Scalar>& params, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(PolicyParams<Scalar>& params, const PolicyWeights<PolicyMatrix<Scalar>>& gradient);
  double learning_rate() const { return learning_rate_; }
  long steps() const { return steps_; }

 private:
  double learning_rate_, beta1_, beta2_, epsilon_;
  long steps_ = 0;
  PolicyWeights<PolicyMatrix<Scalar>> first_, second_;
};

struct StepReport {
  double loss = 0.0;
  double gradient_norm = 0.0;
};

/// One ascent step on J. Throws std::runtime_error (leaving params
/// untouched) when the gradient is not finite. Requires leader_weight >= 1.
template <typename Scalar>
StepReport policy_gradient_step(const RolloutBatch& batch, PolicyParams<Scalar>& params,
                                AdamOptimizer<Scalar>& optimizer, double leader_weight);

struct TrainConfig {
  GeneratorConfig generator = default_config();
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double leader_weight = 2.0;
  PolicyHyperparams hyper;
  HeuristicConfig heuristic;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct CurveRecord {
  int epoch = 0;
  double mean_reward = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  PolicyParams<float> params;
  std::vector<CurveRecord> curve;
  long heuristic_solves = 0;
};

/// Per epoch: B fresh instances, |K| multi-start sampled rollouts each,
/// every rollout solved by the heuristic, one policy-gradient step.
TrainResult train(const TrainConfig& config,
                  const std::function<void(const CurveRecord&)>& on_epoch = {});

struct OrderEvaluation {
  std::vector<Index> order;
  ObjectiveBreakdown breakdown;
  bool feasible = true;
};

struct InferenceResult {
  std::vector<Index> order;
  Assignment assignment;
  ObjectiveBreakdown breakdown;
  std::vector<OrderEvaluation> candidates;
};

/// Greedy multi-start decode (|K| candidates), each solved; returns the
/// candidate with the best reward (first on ties).
InferenceResult infer_order(const ProblemInstance& instance, const PolicyParams<float>& params,
                            const HeuristicConfig& heuristic = {});

struct ExhaustiveResult {
  std::vector<Index> order;
  ObjectiveBreakdown breakdown;
  long evaluated = 0;
  long infeasible = 0;
};

/// All |K|! orders in lexicographic order; the first minimizer wins.
/// Orders whose subproblems are infeasible are skipped. Throws
/// std::invalid_argument for |K| > 8.
ExhaustiveResult exhaustive_order_search(const ProblemInstance& instance,
                                         const HeuristicConfig& heuristic = {});

struct RandomOrderStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> objectives;
  std::vector<std::vector<Index>> orders;
};

RandomOrderStats random_order_baseline(const ProblemInstance& instance, int n_samples,
                                       std::uint64_t seed, const HeuristicConfig& heuristic = {});

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

extern template Encoding<float> encode(const TypeFeatures&, const PolicyParams<float>&);
extern template Encoding<double> encode(const TypeFeatures&, const PolicyParams<double>&);
extern template std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures&,
                                                              const PolicyParams<float>&,
                                                              const DecodeOptions&);
extern template std::vector<DecodedTrajectory> decode_rollout(const TypeFeatures&,
                                                              const PolicyParams<double>&,
                                                              const DecodeOptions&);
extern template SurrogateGradient<float> surrogate_gradient(const RolloutBatch&,
                                                            const PolicyParams<float>&, double);
extern template SurrogateGradient<double> surrogate_gradient(const RolloutBatch&,
                                                             const PolicyParams<double>&, double);
extern template class AdamOptimizer<float>;
extern template class AdamOptimizer<double>;
extern template StepReport policy_gradient_step(const RolloutBatch&, PolicyParams<float>&,
                                                AdamOptimizer<float>&, double);
extern template StepReport policy_gradient_step(const RolloutBatch&, PolicyParams<double>&,
                                                AdamOptimizer<double>&, double);

}  // namespace rackopt
