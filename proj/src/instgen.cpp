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

#include "rackopt/instgen.hpp"

#include "rackopt/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rackopt {

namespace {

enum Stream : std::uint64_t { kDemands = 1, kPlacementLimit = 2, kLimits = 3, kPrior = 4 };

std::string join(const std::vector<std::string>& lines) {
  std::ostringstream out;
  for (std::size_t i = 0; i < lines.size(); ++i) out << (i ? "; " : "") << lines[i];
  return out.str();
}

}  // namespace

bool GeneratorConfig::operator==(const GeneratorConfig& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return num_positions == o.num_positions && num_rack_types == o.num_rack_types &&
         num_resources == o.num_resources && scope_counts == o.scope_counts &&
         demand_range == o.demand_range && placement_limit_range == o.placement_limit_range &&
         limit_ranges == o.limit_ranges && prior_probabilities == o.prior_probabilities &&
         same(resource_matrix, o.resource_matrix) && same(movement_weights, o.movement_weights) &&
         beta_spread == o.beta_spread && beta_limit == o.beta_limit &&
         gamma_placement == o.gamma_placement && spread_templates == o.spread_templates &&
         seed == o.seed;
}

Eigen::MatrixXd default_resource_matrix() {
  Eigen::MatrixXd r(10, 10);
  r << 0, 0, 0, 0, 0, 1, 1, 0, 1, 0,  //
      0, 1, 0, 0, 1, 1, 0, 0, 0, 0,   //
      0, 0, 0, 0, 1, 0, 1, 0, 1, 0,   //
      0, 1, 1, 0, 0, 0, 1, 0, 0, 1,   //
      0, 1, 0, 1, 0, 0, 0, 0, 1, 0,   //
      0, 0, 1, 1, 1, 0, 1, 0, 1, 0,   //
      1, 0, 1, 1, 0, 0, 0, 0, 0, 0,   //
      1, 1, 0, 1, 0, 0, 1, 0, 0, 0,   //
      0, 0, 0, 0, 1, 0, 0, 0, 1, 0,   //
      1, 1, 0, 0, 0, 0, 0, 0, 0, 1;
  return r;
}

std::vector<double> default_prior_probabilities() {
  return {0.033, 0.014, 0.030, 0.010, 0.009, 0.102, 0.029, 0.204, 0.018, 0.051, 0.5};
}

std::vector<SpreadTemplate> default_spread_templates() {
  return {
      {0, {6, 7, 9}, 0},
      {4, {1, 2, 5, 8}, 1},
      {6, {0, 2, 3, 5, 7}, 1},
      {8, {0, 2, 4, 5, 8}, 2},
  };
}

GeneratorConfig default_config() {
  GeneratorConfig c;
  c.beta_spread = 50.0;
  c.beta_limit = 0.2;
  c.prior_probabilities = default_prior_probabilities();
  c.resource_matrix = default_resource_matrix();
  c.movement_weights = Eigen::VectorXd::Ones(c.num_rack_types);
  c.spread_templates = default_spread_templates();
  return c;
}

GeneratorConfig resized_config(Index num_positions) {
  GeneratorConfig c = default_config();
  c.num_positions = num_positions;
  return c;
}

GeneratorConfig scalability_config() {
  constexpr Index kTiles = 10;
  GeneratorConfig c = default_config();
  const Eigen::MatrixXd base = c.resource_matrix;
  const std::vector<double> base_prob = c.prior_probabilities;
  c.num_positions = 100'000;
  c.num_rack_types = base.rows() * kTiles;
  c.scope_counts = {20, 100, 500};
  c.limit_ranges = {{30.0, 60.0}, {300.0, 500.0}, {900.0, 1100.0}};
  c.resource_matrix = base.replicate(kTiles, 1);
  c.movement_weights = Eigen::VectorXd::Ones(c.num_rack_types);
  c.prior_probabilities.assign(c.num_rack_types + 1, 0.0);
  for (Index k = 0; k < c.num_rack_types; ++k) {
    c.prior_probabilities[k] = base_prob[k % base.rows()] / static_cast<double>(kTiles);
  }
  c.prior_probabilities.back() = base_prob.back();
  for (SpreadTemplate& t : c.spread_templates) {
    t.rack_group.clear();
    for (Index k = 0; k < c.num_rack_types; ++k) {
      if (c.resource_matrix(k, t.resource) != 0.0) t.rack_group.push_back(k);
    }
  }
  return c;
}

GeneratorConfig tiny_config() {
  GeneratorConfig c;
  c.num_positions = 8;
  c.num_rack_types = 2;
  c.num_resources = 2;
  c.scope_counts = {2, 4};
  c.demand_range = {1, 3};
  c.placement_limit_range = {1, 4};
  c.limit_ranges = {{1.0, 4.0}, {0.5, 2.0}};
  c.prior_probabilities = {0.25, 0.25, 0.5};
  c.resource_matrix.resize(2, 2);
  c.resource_matrix << 1, 0,  //
      1, 1;
  c.movement_weights = Eigen::VectorXd::Ones(2);
  c.beta_spread = 1.0;
  c.beta_limit = 1.0;
  c.gamma_placement = 10.0;
  c.spread_templates = {{0, {0, 1}, 1}, {1, {1}, 0}};
  return c;
}

std::vector<std::string> validate_config(const GeneratorConfig& c) {
  std::vector<std::string> out;
  auto fail = [&](const std::string& m) { out.push_back(m); };
  if (c.num_positions <= 0) fail("num_positions must be positive");
  if (c.num_rack_types <= 0) fail("num_rack_types must be positive");
  if (c.num_resources <= 0) fail("num_resources must be positive");
  if (c.scope_counts.empty()) fail("scope_counts is empty");
  for (std::size_t l = 0; l < c.scope_counts.size(); ++l) {
    const Index n = c.scope_counts[l];
    if (n <= 0) {
      fail("scope_counts[" + std::to_string(l) + "] must be positive");
    } else if (c.num_positions > 0 && c.num_positions % n != 0) {
      fail("scope_counts[" + std::to_string(l) + "] does not divide num_positions");
    } else if (l > 0 && c.scope_counts[l - 1] > 0 && n % c.scope_counts[l - 1] != 0) {
      fail("scope_counts[" + std::to_string(l) + "] does not nest in level " + std::to_string(l - 1));
    }
  }
  if (c.limit_ranges.size() != c.scope_counts.size()) fail("limit_ranges needs one range per level");
  for (const auto& r : c.limit_ranges) {
    if (!(r.lo >= 0.0 && r.lo <= r.hi)) fail("limit range must satisfy 0 <= lo <= hi");
  }
  if (!(c.demand_range.lo >= 0 && c.demand_range.lo <= c.demand_range.hi)) {
    fail("demand_range must satisfy 0 <= lo <= hi");
  }
  if (!(c.placement_limit_range.lo >= 0 && c.placement_limit_range.lo <= c.placement_limit_range.hi)) {
    fail("placement_limit_range must satisfy 0 <= lo <= hi");
  }
  if (static_cast<Index>(c.prior_probabilities.size()) != c.num_rack_types + 1) {
    fail("prior_probabilities needs num_rack_types + 1 entries");
  } else {
    double sum = 0.0;
    for (double p : c.prior_probabilities) {
      if (!(p >= 0.0)) fail("prior_probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) fail("prior_probabilities must sum to 1");
  }
  if (c.resource_matrix.rows() != c.num_rack_types || c.resource_matrix.cols() != c.num_resources) {
    fail("resource_matrix must be num_rack_types x num_resources");
  } else if ((c.resource_matrix.array() < 0.0).any()) {
    fail("resource_matrix must be non-negative");
  }
  if (c.movement_weights.size() != c.num_rack_types) {
    fail("movement_weights needs num_rack_types entries");
  } else if ((c.movement_weights.array() < 0.0).any()) {
    fail("movement_weights must be non-negative");
  }
  if (!(c.beta_spread >= 0.0 && c.beta_limit >= 0.0 && c.gamma_placement >= 0.0)) {
    fail("weights must be non-negative");
  }
  for (std::size_t i = 0; i < c.spread_templates.size(); ++i) {
    const SpreadTemplate& t = c.spread_templates[i];
    const std::string name = "spread_templates[" + std::to_string(i) + "]";
    if (t.resource < 0 || t.resource >= c.num_resources) fail(name + ".resource out of range");
    if (t.level < 0 || t.level >= static_cast<Index>(c.scope_counts.size())) {
      fail(name + ".level out of range");
    } else if (c.scope_counts[t.level] < 2) {
      fail(name + ".level has fewer than 2 scopes");
    }
    if (t.rack_group.empty()) fail(name + ".rack_group is empty");
    for (Index k : t.rack_group) {
      if (k < 0 || k >= c.num_rack_types) fail(name + ".rack_group out of range");
    }
  }
  return out;
}

ScopeHierarchy build_scope_hierarchy(const GeneratorConfig& config) {
  const Index positions = config.num_positions;
  if (positions <= 0) throw std::invalid_argument("num_positions must be positive");
  for (std::size_t l = 0; l < config.scope_counts.size(); ++l) {
    const Index n = config.scope_counts[l];
    if (n <= 0 || positions % n != 0) {
      throw std::invalid_argument("scope count " + std::to_string(n) + " does not divide " +
                                  std::to_string(positions) + " positions");
    }
    if (l > 0 && n % config.scope_counts[l - 1] != 0) {
      throw std::invalid_argument("scope level " + std::to_string(l) + " does not nest");
    }
  }
  ScopeHierarchy h;
  const Index total = std::accumulate(config.scope_counts.begin(), config.scope_counts.end(), Index{0});
  h.membership = BoolMatrix::Zero(positions, total);
  h.level_of_scope.reserve(total);
  Index offset = 0;
  for (std::size_t l = 0; l < config.scope_counts.size(); ++l) {
    const Index n = config.scope_counts[l];
    const Index block = positions / n;
    h.level_offsets.push_back(offset);
    for (Index s = 0; s < n; ++s) {
      h.membership.col(offset + s).segment(s * block, block).setConstant(true);
      h.level_of_scope.push_back(static_cast<Index>(l));
    }
    offset += n;
  }
  h.level_offsets.push_back(offset);
  return h;
}

Assignment sample_prior_mapping(const GeneratorConfig& config, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(kPrior);
  const Index types = config.num_rack_types;
  Assignment prior = Assignment::empty(config.num_positions, types);
  for (Index p = 0; p < config.num_positions; ++p) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (Index k = 0; k < types; ++k) {
      cumulative += config.prior_probabilities[k];
      if (u < cumulative) {
        prior.place(p, k);
        break;
      }
    }
  }
  return prior;
}

ProblemInstance generate_instance(const GeneratorConfig& config, std::uint64_t seed) {
  if (auto errors = validate_config(config); !errors.empty()) {
    throw std::invalid_argument("invalid generator config: " + join(errors));
  }
  const CounterRng root(seed);
  ProblemInstance in;
  in.num_positions = config.num_positions;
  in.num_rack_types = config.num_rack_types;
  in.num_resources = config.num_resources;
  in.resource_matrix = config.resource_matrix;
  in.movement_weights = config.movement_weights;
  in.beta_spread = config.beta_spread;
  in.beta_limit = config.beta_limit;
  in.gamma_placement = config.gamma_placement;
  in.seed = seed;

  ScopeHierarchy h = build_scope_hierarchy(config);
  in.scope_membership = std::move(h.membership);

  CounterRng demand_rng = root.split(kDemands);
  in.demands.resize(config.num_rack_types);
  for (Index k = 0; k < config.num_rack_types; ++k) {
    in.demands[k] = static_cast<int>(demand_rng.uniform_int(config.demand_range.lo, config.demand_range.hi));
  }
  CounterRng q_rng = root.split(kPlacementLimit);
  in.placement_limit = static_cast<int>(
      q_rng.uniform_int(config.placement_limit_range.lo, config.placement_limit_range.hi));

  CounterRng limit_rng = root.split(kLimits);
  in.scope_limits.resize(in.num_scopes(), config.num_resources);
  for (Index s = 0; s < in.num_scopes(); ++s) {
    const Range<double>& range = config.limit_ranges[h.level_of_scope[s]];
    for (Index r = 0; r < config.num_resources; ++r) {
      in.scope_limits(s, r) = limit_rng.uniform(range.lo, range.hi);
    }
  }

  in.prior_assignment = sample_prior_mapping(config, seed);

  // Clip demands so that every solve order is feasible: a type solved first
  // sees all unsolved types still on their prior positions, so
  // sum_k max(d_k, prior_k) <= |P| is required. This also gives
  // sum_k d_k <= |P|.
  const Eigen::VectorXi prior_counts = type_counts(in.prior_assignment);
  auto occupied_bound = [&] { return in.demands.cwiseMax(prior_counts).sum(); };
  while (occupied_bound() > in.num_positions) {
    Index largest = -1;
    for (Index k = 0; k < in.num_rack_types; ++k) {
      if (in.demands[k] > prior_counts[k] && (largest < 0 || in.demands[k] > in.demands[largest])) {
        largest = k;
      }
    }
    --in.demands[largest];
  }

  for (const SpreadTemplate& t : config.spread_templates) {
    SpreadRequirement req;
    req.resource = t.resource;
    req.rack_group = t.rack_group;
    for (Index s = h.level_offsets[t.level]; s < h.level_offsets[t.level + 1]; ++s) {
      req.scope_group.push_back(s);
    }
    in.spread_requirements.push_back(std::move(req));
  }
  return in;
}

std::uint64_t batch_seed(std::uint64_t base_seed, std::uint64_t index) {
  return CounterRng(base_seed, index)();
}

std::vector<ProblemInstance> generate_batch(const GeneratorConfig& config, std::uint64_t base_seed,
                                            std::size_t count) {
  std::vector<ProblemInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_instance(config, batch_seed(base_seed, i)));
  return out;
}

}  // namespace rackopt
