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

#include "doctest.h"
#include "test_support.hpp"

#include "rackopt/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace rackopt;
using rackopt::testing::make_t1;

namespace {

using Mat = std::vector<std::vector<double>>;

// Plain-loop reference for the policy network, written without Eigen.
Mat to_mat(const PolicyMatrix<double>& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

Mat mul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      for (std::size_t t = 0; t < b.size(); ++t) out[i][j] += a[i][t] * b[t][j];
    }
  }
  return out;
}

void add_bias(Mat& a, const Mat& bias) {
  for (auto& row : a) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[0][j];
  }
}

Mat layer_norm(const Mat& a, const Mat& gain, const Mat& bias, double eps) {
  Mat out = a;
  for (auto& row : out) {
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v / row.size();
    for (double v : row) var += (v - mean) * (v - mean) / row.size();
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + eps) * gain[0][j] + bias[0][j];
  }
  return out;
}

// Multi-head attention of `queries` over `keys`/`values`; masked keys skipped.
Mat attend(const Mat& q, const Mat& k, const Mat& v, int heads, const std::vector<char>& mask) {
  const std::size_t d = q[0].size(), dk = d / heads;
  Mat out(q.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (int h = 0; h < heads; ++h) {
      std::vector<double> w(k.size(), 0.0);
      double total = 0.0, peak = -1e300;
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (!mask.empty() && mask[j]) continue;
        double s = 0.0;
        for (std::size_t t = h * dk; t < (h + 1) * dk; ++t) s += q[i][t] * k[j][t];
        w[j] = s / std::sqrt(static_cast<double>(dk));
        peak = std::max(peak, w[j]);
      }
      for (std::size_t j = 0; j < k.size(); ++j) {
        w[j] = (!mask.empty() && mask[j]) ? 0.0 : std::exp(w[j] - peak);
        total += w[j];
      }
      for (std::size_t j = 0; j < k.size(); ++j) {
        for (std::size_t t = h * dk; t < (h + 1) * dk; ++t) out[i][t] += w[j] / total * v[j][t];
      }
    }
  }
  return out;
}

struct Reference {
  Mat embeddings;
  std::vector<double> graph;
  std::vector<double> first_step_log_probs;
};

Reference reference_forward(const PolicyParams<double>& params, const Mat& features) {
  const auto& w = params.weights;
  const auto& hp = params.hyper;
  Mat h = mul(features, to_mat(w.embed_weight));
  add_bias(h, to_mat(w.embed_bias));
  for (const auto& l : w.layers) {
    const Mat att = mul(attend(mul(h, to_mat(l.query)), mul(h, to_mat(l.key)), mul(h, to_mat(l.value)), hp.heads, {}),
                        to_mat(l.out));
    Mat sum = h;
    for (std::size_t i = 0; i < h.size(); ++i) {
      for (std::size_t j = 0; j < h[i].size(); ++j) sum[i][j] += att[i][j];
    }
    const Mat h1 = layer_norm(sum, to_mat(l.norm1_gain), to_mat(l.norm1_bias), hp.norm_epsilon);
    Mat hidden = mul(h1, to_mat(l.ff1_weight));
    add_bias(hidden, to_mat(l.ff1_bias));
    for (auto& row : hidden) {
      for (double& v : row) v = std::max(0.0, v);
    }
    Mat ff = mul(hidden, to_mat(l.ff2_weight));
    add_bias(ff, to_mat(l.ff2_bias));
    for (std::size_t i = 0; i < h.size(); ++i) {
      for (std::size_t j = 0; j < h[i].size(); ++j) ff[i][j] += h1[i][j];
    }
    h = layer_norm(ff, to_mat(l.norm2_gain), to_mat(l.norm2_bias), hp.norm_epsilon);
  }
  Reference ref;
  ref.embeddings = h;
  const std::size_t d = h[0].size();
  ref.graph.assign(d, 0.0);
  for (const auto& row : h) {
    for (std::size_t j = 0; j < d; ++j) ref.graph[j] += row[j] / h.size();
  }
  // First decoding step: context [graph, 0], nothing masked.
  Mat context(1, std::vector<double>(2 * d, 0.0));
  for (std::size_t j = 0; j < d; ++j) context[0][j] = ref.graph[j];
  const Mat query = mul(context, to_mat(w.decoder_query));
  const Mat glimpse = mul(attend(query, mul(h, to_mat(w.decoder_key)), mul(h, to_mat(w.decoder_value)), hp.heads, {}),
                          to_mat(w.decoder_out));
  const Mat lk = mul(h, to_mat(w.decoder_logit_key));
  std::vector<double> logits(h.size());
  double peak = -1e300;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += glimpse[0][j] * lk[i][j];
    logits[i] = hp.logit_clip * std::tanh(s / std::sqrt(static_cast<double>(d)));
    peak = std::max(peak, logits[i]);
  }
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  for (double v : logits) ref.first_step_log_probs.push_back(v - peak - std::log(total));
  return ref;
}

PolicyHyperparams small_hyper() {
  PolicyHyperparams h;
  h.d_model = 8;
  h.heads = 2;
  h.layers = 2;
  h.ff_width = 16;
  return h;
}

TypeFeatures random_features(Index K, std::uint64_t seed) {
  CounterRng rng(seed);
  TypeFeatures f;
  f.values.resize(K, 2);
  for (Index i = 0; i < f.values.size(); ++i) f.values(i) = rng.uniform(-1.0, 1.0);
  return f;
}

// Generator configuration with |K| types at 60 positions.
GeneratorConfig small_config(Index K) {
  GeneratorConfig cfg = default_config();
  cfg.num_positions = 60;
  cfg.num_rack_types = K;
  cfg.scope_counts = {2, 6};
  cfg.demand_range = {2, 6};
  cfg.placement_limit_range = {30, 50};
  cfg.limit_ranges = {{3.0, 6.0}, {1.0, 3.0}};
  cfg.resource_matrix = default_resource_matrix().topRows(K);
  cfg.movement_weights = Eigen::VectorXd::Ones(K);
  const auto table = default_prior_probabilities();
  cfg.prior_probabilities.assign(table.begin(), table.begin() + K);
  const double used = std::accumulate(cfg.prior_probabilities.begin(), cfg.prior_probabilities.end(), 0.0);
  for (double& p : cfg.prior_probabilities) p *= 0.5 / used;
  cfg.prior_probabilities.push_back(0.5);
  cfg.spread_templates = {{1, {0}, 1}, {6, {0, K - 1}, 0}};
  return cfg;
}

RolloutBatch frozen_batch(const PolicyParams<double>& params, Index K, int instances, std::uint64_t seed) {
  RolloutBatch batch;
  CounterRng rng(seed);
  for (int i = 0; i < instances; ++i) {
    InstanceRollout r;
    r.features = random_features(K, seed * 31 + i);
    DecodeOptions opt{static_cast<int>(K), true, DecodeMode::kSample, seed + i};
    for (DecodedTrajectory& d : decode_rollout(r.features, params, opt)) {
      r.trajectories.push_back({d.order, d.log_prob, rng.uniform(-700.0, -500.0)});
    }
    assign_baseline(r);
    batch.instances.push_back(std::move(r));
  }
  return batch;
}

}  // namespace

TEST_CASE("featurize") {
  ProblemInstance in = generate_instance(default_config(), 0);
  // Type 5 (five resources) in two of four requirements.
  in.spread_requirements = {{0, {5, 1}, {0, 1}}, {4, {5}, {2, 3}}, {6, {0}, {2, 3}}, {8, {2}, {2, 3}}};
  in.demands[3] = type_counts(in.prior_assignment)[3];
  const TypeFeatures f = featurize(in);
  CHECK(f.values(5, 1) == 0.5);
  CHECK(f.values(3, 0) == 0.0);
  const Eigen::VectorXi current = type_counts(in.prior_assignment);
  CHECK(f.values(0, 0) == static_cast<double>(in.demands[0] - current[0]) / 1000.0);

  ProblemInstance t1 = make_t1();
  t1.resource_matrix(1, 0) = 0.0;
  t1.spread_requirements[0].rack_group = {0};
  CHECK(featurize(t1).values(1, 1) == 0.0);
  CHECK(featurize(t1).values.allFinite());
}

TEST_CASE("encode: identical tokens get identical embeddings") {
  const PolicyParams<float> params = init_policy<float>(PolicyHyperparams{}, 1);
  TypeFeatures f = random_features(5, 2);
  f.values.row(3) = f.values.row(1);
  const Encoding<float> e = encode(f, params);
  CHECK(e.embeddings.rows() == 5);
  CHECK(e.embeddings.cols() == 64);
  CHECK(e.embeddings.row(3) == e.embeddings.row(1));
}

TEST_CASE("encode: permutation equivariance") {
  const PolicyParams<double> params = init_policy<double>(PolicyHyperparams{}, 3);
  const TypeFeatures f = random_features(7, 4);
  std::vector<Index> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng(5).shuffle(std::span<Index>(perm));
  TypeFeatures g;
  g.values.resize(7, 2);
  for (Index i = 0; i < 7; ++i) g.values.row(i) = f.values.row(perm[i]);
  const Encoding<double> a = encode(f, params);
  const Encoding<double> b = encode(g, params);
  double worst = 0.0;
  for (Index i = 0; i < 7; ++i) worst = std::max(worst, (b.embeddings.row(i) - a.embeddings.row(perm[i])).cwiseAbs().maxCoeff());
  // Attention sums over keys in a different order, so equality holds to rounding.
  CHECK(worst < 1e-12);
  CHECK((a.graph - b.graph).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode and first decode step match a scalar reference at d_model = 4") {
  PolicyHyperparams hp;
  hp.d_model = 4;
  hp.heads = 2;
  hp.layers = 2;
  hp.ff_width = 8;
  const PolicyParams<double> params = init_policy<double>(hp, 21);
  const TypeFeatures f = random_features(5, 22);
  const Reference ref = reference_forward(params, to_mat(f.values));
  const Encoding<double> e = encode(f, params);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 4; ++j) CHECK(e.embeddings(i, j) == doctest::Approx(ref.embeddings[i][j]).epsilon(1e-12));
  }
  for (Index j = 0; j < 4; ++j) CHECK(e.graph(0, j) == doctest::Approx(ref.graph[j]).epsilon(1e-12));

  const auto traj = decode_rollout(f, params, {1, false, DecodeMode::kGreedy, 0});
  const Eigen::VectorXd& p0 = traj[0].step_probabilities[0];
  for (Index k = 0; k < 5; ++k) CHECK(p0[k] == doctest::Approx(std::exp(ref.first_step_log_probs[k])).epsilon(1e-12));
}

TEST_CASE("encode: zeroed embedding projection stays finite") {
  PolicyParams<double> params = init_policy<double>(small_hyper(), 2);
  params.weights.embed_weight.setZero();
  params.weights.embed_bias.setZero();
  const Encoding<double> e = encode(random_features(4, 1), params);
  CHECK(e.embeddings.allFinite());
}

TEST_CASE("encode rejects non-finite weights") {
  PolicyParams<float> params = init_policy<float>(small_hyper(), 2);
  params.weights.layers[0].key(0, 0) = std::nanf("");
  CHECK_THROWS_AS(encode(random_features(3, 1), params), std::invalid_argument);
}

TEST_CASE("decode: single type") {
  const PolicyParams<float> params = init_policy<float>(small_hyper(), 1);
  const auto t = decode_rollout(random_features(1, 1), params, {1, true, DecodeMode::kSample, 3});
  REQUIRE(t.size() == 1);
  CHECK(t[0].order == std::vector<Index>{0});
  CHECK(t[0].log_prob == 0.0);
}

TEST_CASE("decode: multi-start trajectories are permutations with masked probabilities") {
  const PolicyParams<float> params = init_policy<float>(PolicyHyperparams{}, 4);
  for (const DecodeMode mode : {DecodeMode::kSample, DecodeMode::kGreedy}) {
    const TypeFeatures f = random_features(6, 8);
    const auto trajs = decode_rollout(f, params, {6, true, mode, 17});
    REQUIRE(trajs.size() == 6);
    for (std::size_t j = 0; j < trajs.size(); ++j) {
      const auto& t = trajs[j];
      CHECK(t.order.front() == static_cast<Index>(j));
      CHECK(std::set<Index>(t.order.begin(), t.order.end()).size() == 6);
      REQUIRE(t.step_probabilities.size() == 5);
      double log_prob = 0.0;
      for (std::size_t s = 0; s < t.step_probabilities.size(); ++s) {
        const Eigen::VectorXd& p = t.step_probabilities[s];
        CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
        for (std::size_t prev = 0; prev <= s; ++prev) CHECK(p[t.order[prev]] == 0.0);
        log_prob += std::log(p[t.order[s + 1]]);
      }
      CHECK(t.log_prob == doctest::Approx(log_prob).epsilon(1e-5));
    }
  }
  const auto three = decode_rollout(random_features(3, 1), params, {3, true, DecodeMode::kSample, 1});
  CHECK(three[0].order[0] == 0);
  CHECK(three[1].order[0] == 1);
  CHECK(three[2].order[0] == 2);
  CHECK_THROWS_AS(decode_rollout(random_features(3, 1), params, {2, true, DecodeMode::kSample, 1}),
                  std::invalid_argument);
}

TEST_CASE("decode: sampling is seeded") {
  const PolicyParams<float> params = init_policy<float>(small_hyper(), 4);
  const TypeFeatures f = random_features(8, 3);
  const auto a = decode_rollout(f, params, {8, true, DecodeMode::kSample, 5});
  const auto b = decode_rollout(f, params, {8, true, DecodeMode::kSample, 5});
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j].order == b[j].order);
    CHECK(a[j].log_prob == b[j].log_prob);
  }
}

TEST_CASE("reward is the negated objective") {
  ObjectiveBreakdown b;
  CHECK(reward(b) == 0.0);
  b.augmented = 1025.0;
  CHECK(reward(b) == -1025.0);
  const ProblemInstance in = make_t1();
  const Assignment good = testing::binary_from(4, 2, {{0, 0}, {2, 1}});
  const Assignment bad = testing::binary_from(4, 2, {{0, 0}, {1, 1}});
  CHECK(reward(in, good) > reward(in, bad));
}

TEST_CASE("advantages: mean baseline and leader weight") {
  InstanceRollout r;
  for (double v : {-4.0, -1.0, -2.5, -0.5}) r.trajectories.push_back({{}, 0.0, v});
  assign_baseline(r);
  CHECK(r.baseline == -2.0);
  const auto plain = advantages(r, 1.0);
  CHECK(std::accumulate(plain.begin(), plain.end(), 0.0) == 0.0);
  const auto led = advantages(r, 2.0);
  CHECK(led[3] == 3.0);
  CHECK(led[0] == plain[0]);

  InstanceRollout tied;
  for (int j = 0; j < 3; ++j) tied.trajectories.push_back({{}, 0.0, -7.25});
  assign_baseline(tied);
  for (double a : advantages(tied, 2.0)) CHECK(a == 0.0);
}

TEST_CASE("surrogate gradient: equal rewards give a zero gradient") {
  const PolicyParams<float> params = init_policy<float>(small_hyper(), 9);
  RolloutBatch batch = frozen_batch(params.cast<double>(), 4, 2, 3);
  for (auto& r : batch.instances) {
    for (auto& t : r.trajectories) t.reward = -12.5;
    assign_baseline(r);
  }
  const SurrogateGradient<float> g = surrogate_gradient(batch, params, 2.0);
  for (const auto* t : g.gradient.tensors()) CHECK(t->isZero(0.0));
  CHECK(g.loss == 0.0);
}

TEST_CASE("surrogate gradient matches central differences") {
  const PolicyParams<double> params = init_policy<double>(small_hyper(), 12);
  const RolloutBatch batch = frozen_batch(params, 5, 3, 7);
  const SurrogateGradient<double> g = surrogate_gradient(batch, params, 2.0);
  const SurrogateGradient<float> gf = surrogate_gradient(batch, params.cast<float>(), 2.0);

  // Loss reconstructed directly from the trajectories.
  CounterRng rng(99);
  double worst_double = 0.0, worst_float = 0.0;
  const auto names = params.weights.names();
  for (int trial = 0; trial < 20; ++trial) {
    PolicyParams<double> probe = params;
    auto tensors = probe.weights.tensors();
    const auto t = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tensors.size()) - 1));
    const Index i = static_cast<Index>(rng.uniform_int(0, tensors[t]->size() - 1));
    const double h = 1e-5;
    const double base = (*tensors[t])(i);
    (*tensors[t])(i) = base + h;
    const double up = surrogate_gradient(batch, probe, 2.0).loss;
    (*tensors[t])(i) = base - h;
    const double down = surrogate_gradient(batch, probe, 2.0).loss;
    const double numeric = (up - down) / (2 * h);
    const double analytic = (*g.gradient.tensors()[t])(i);
    const double analytic_float = (*gf.gradient.tensors()[t])(i);
    const double scale = std::max(std::abs(numeric), 1e-2);
    worst_double = std::max(worst_double, std::abs(analytic - numeric) / scale);
    worst_float = std::max(worst_float, std::abs(analytic_float - numeric) / scale);
  }
  MESSAGE("surrogate gradient relative error: double " << worst_double << ", float " << worst_float);
  CHECK(worst_double < 1e-6);
  CHECK(worst_float < 1e-3);
}

TEST_CASE("policy_gradient_step") {
  PolicyParams<float> params = init_policy<float>(small_hyper(), 5);
  const RolloutBatch batch = frozen_batch(params.cast<double>(), 4, 2, 1);
  AdamOptimizer<float> opt(params, 1e-3);
  CHECK_THROWS_AS(policy_gradient_step(batch, params, opt, 0.5), std::invalid_argument);
  const PolicyParams<float> before = params;
  const double loss0 = surrogate_gradient(batch, params, 2.0).loss;
  const StepReport report = policy_gradient_step(batch, params, opt, 2.0);
  CHECK(report.loss == loss0);
  CHECK(report.gradient_norm > 0.0);
  CHECK_FALSE(params == before);
  CHECK(opt.steps() == 1);
  // A small step along the negative gradient lowers the surrogate loss.
  CHECK(surrogate_gradient(batch, params, 2.0).loss < loss0);
}

TEST_CASE("Adam step on a known gradient") {
  PolicyParams<double> params = init_policy<double>(small_hyper(), 1);
  AdamOptimizer<double> opt(params, 0.1);
  auto grad = params.weights.map<PolicyMatrix<double>>([](const PolicyMatrix<double>& m) {
    return PolicyMatrix<double>::Constant(m.rows(), m.cols(), 2.0).eval();
  });
  const double before = params.weights.embed_weight(0, 0);
  opt.step(params, grad);
  // First bias-corrected step moves by lr * g / (|g| + eps).
  CHECK(params.weights.embed_weight(0, 0) == doctest::Approx(before - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("train: counting and determinism") {
  TrainConfig cfg;
  cfg.generator = small_config(3);
  cfg.epochs = 1;
  cfg.batch_size = 2;
  cfg.hyper = small_hyper();
  cfg.seed = 4;
  int callbacks = 0;
  const TrainResult a = train(cfg, [&](const CurveRecord&) { ++callbacks; });
  CHECK(a.heuristic_solves == 6);
  CHECK(callbacks == 1);
  CHECK(a.curve.size() == 1);
  CHECK_FALSE(a.params == init_policy<float>(cfg.hyper, CounterRng(cfg.seed).split(0x1417)()));

  cfg.epochs = 3;
  const TrainResult b = train(cfg);
  const TrainResult c = train(cfg);
  REQUIRE(b.curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b.curve[i].mean_reward == c.curve[i].mean_reward);
    CHECK(b.curve[i].loss == c.curve[i].loss);
  }
  CHECK(b.params == c.params);
  cfg.workers = 3;
  CHECK(train(cfg).params == b.params);
}

TEST_CASE("train: generation failures carry epoch context") {
  TrainConfig cfg;
  cfg.generator = small_config(3);
  cfg.generator.scope_counts = {7, 6};
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.hyper = small_hyper();
  try {
    train(cfg);
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(testing::contains(e.what(), "epoch 1 instance 0"));
  }
}

TEST_CASE("infer_order on T1 with untrained weights") {
  const PolicyParams<float> params = init_policy<float>(small_hyper(), 6);
  const ProblemInstance in = make_t1();
  const InferenceResult r = infer_order(in, params);
  CHECK(r.candidates.size() == 2);
  double worst = -1e300;
  for (const auto& c : r.candidates) worst = std::max(worst, c.breakdown.augmented);
  CHECK(r.breakdown.augmented <= worst);
  const std::vector<Index> a{0, 1}, b{1, 0};
  CHECK(r.breakdown.augmented <= std::max(solve_ordered(in, a).breakdown.augmented,
                                          solve_ordered(in, b).breakdown.augmented));
  CHECK(r.breakdown.augmented == total_utility(in, r.assignment).augmented);

  ProblemInstance one = in;
  one.num_rack_types = 1;
  one.resource_matrix = Eigen::MatrixXd::Ones(1, 1);
  one.demands = Eigen::VectorXi::Ones(1);
  one.movement_weights = Eigen::VectorXd::Ones(1);
  one.spread_requirements = {{0, {0}, {0, 1}}};
  one.prior_assignment = Assignment::empty(4, 1);
  CHECK(infer_order(one, params).order == std::vector<Index>{0});
}

TEST_CASE("infer_order never exceeds its worst candidate on generated instances") {
  const PolicyParams<float> params = init_policy<float>(small_hyper(), 8);
  const GeneratorConfig cfg = small_config(6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance in = generate_instance(cfg, seed);
    const InferenceResult r = infer_order(in, params);
    double best = 1e300;
    for (const auto& c : r.candidates) best = std::min(best, c.breakdown.augmented);
    CHECK(r.breakdown.augmented == best);
  }
}

TEST_CASE("exhaustive_order_search") {
  const ProblemInstance in = make_t1();
  const ExhaustiveResult r = exhaustive_order_search(in);
  CHECK(r.evaluated == 2);
  const std::vector<Index> a{0, 1}, b{1, 0};
  CHECK(r.breakdown.augmented ==
        std::min(solve_ordered(in, a).breakdown.augmented, solve_ordered(in, b).breakdown.augmented));

  const ProblemInstance nine = generate_instance(small_config(9), 1);
  CHECK_THROWS_AS(exhaustive_order_search(nine), std::invalid_argument);
}

TEST_CASE("random_order_baseline") {
  const ProblemInstance in = generate_instance(small_config(5), 2);
  const RandomOrderStats one = random_order_baseline(in, 1, 3);
  CHECK(one.mean == one.min);
  CHECK(one.min == one.max);
  CHECK_THROWS_AS(random_order_baseline(in, 0, 3), std::invalid_argument);

  const RandomOrderStats fifty = random_order_baseline(in, 50, 4);
  CHECK(fifty.objectives.size() == 50);
  CHECK(fifty.min >= exhaustive_order_search(in).breakdown.augmented);
  const RandomOrderStats again = random_order_baseline(in, 50, 4);
  CHECK(again.objectives == fifty.objectives);
  for (const auto& order : fifty.orders) CHECK(is_permutation_of_types(order, 5));

  ProblemInstance single = make_t1();
  single.num_rack_types = 1;
  single.resource_matrix = Eigen::MatrixXd::Ones(1, 1);
  single.demands = Eigen::VectorXi::Ones(1);
  single.movement_weights = Eigen::VectorXd::Ones(1);
  single.spread_requirements = {{0, {0}, {0, 1}}};
  single.prior_assignment = Assignment::empty(4, 1);
  const RandomOrderStats flat = random_order_baseline(single, 10, 1);
  CHECK(flat.min == flat.max);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("smoke training trend over ten seeds") {
  // Moving average (window 5) of the per-epoch mean reward, last vs first.
  int rising = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig cfg;
    cfg.generator = small_config(4);
    cfg.batch_size = 4;
    cfg.epochs = 10;
    cfg.seed = seed;
    const TrainResult r = train(cfg);
    auto window = [&](std::size_t start) {
      double s = 0.0;
      for (std::size_t i = start; i < start + 5; ++i) s += r.curve[i].mean_reward;
      return s / 5.0;
    };
    rising += window(5) >= window(0);
  }
  MESSAGE("seeds with a non-decreasing reward trend: " << rising << " of 10");
  CHECK(rising >= 7);
}
