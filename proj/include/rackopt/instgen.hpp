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

#include <cstdint>
#include <string>
#include <vector>

namespace rackopt {

template <typename T>
struct Range {
  T lo{};
  T hi{};
  bool operator==(const Range&) const = default;
};

/// Spread requirement whose scope group is every scope of one hierarchy
/// level.
struct SpreadTemplate {
  Index resource = 0;
  std::vector<Index> rack_group;
  Index level = 0;
  bool operator==(const SpreadTemplate&) const = default;
};

struct GeneratorConfig {
  Index num_positions = 1000;
  Index num_rack_types = 10;
  Index num_resources = 10;
  /// Scopes per level, coarsest first (data centers, suites, MSBs).
  std::vector<Index> scope_counts{2, 10, 50};
  Range<int> demand_range{20, 60};
  Range<int> placement_limit_range{800, 1000};
  /// One limit range per level, sampled per (scope, resource) cell.
  std::vector<Range<double>> limit_ranges{{3.0, 6.0}, {30.0, 50.0}, {90.0, 110.0}};
  /// |K| + 1 entries; the last one is the empty-position category.
  std::vector<double> prior_probabilities;
  Eigen::MatrixXd resource_matrix;
  Eigen::VectorXd movement_weights;
  double beta_spread = 1.0;
  double beta_limit = 1.0;
  double gamma_placement = 100.0;
  std::vector<SpreadTemplate> spread_templates;
  std::uint64_t seed = 0;

  bool operator==(const GeneratorConfig& other) const;
};

/// Rack-type resource table used by the default configuration (10 x 10, 0/1).
Eigen::MatrixXd default_resource_matrix();

/// Prior-mapping probabilities for 10 rack types plus the empty category.
std::vector<double> default_prior_probabilities();

/// Default four requirements; each group is the set of rack types that
/// carry the requirement's resource.
std::vector<SpreadTemplate> default_spread_templates();

/// 1000 positions, 10 rack types, 10 resources, 2/10/50 nested scopes.
/// Weights M_k = 1, beta_spread = 50, beta_limit = 0.2, gamma = 100 put
/// movement, spread and limit penalty at comparable magnitude (~250 each).
GeneratorConfig default_config();

/// default_config() with the position count changed and the scope counts
/// kept (positions must stay divisible by 50).
GeneratorConfig resized_config(Index num_positions);

/// 100,000 positions and 100 rack types: the resource table tiled ten times,
/// each prior probability split over its ten copies, 20/100/500 scopes with
/// limit ranges scaled to the larger scopes.
GeneratorConfig scalability_config();

/// Eight positions, two rack types: small enough for exhaustive search.
GeneratorConfig tiny_config();

std::vector<std::string> validate_config(const GeneratorConfig& config);

struct ScopeHierarchy {
  BoolMatrix membership;            // |P| x |S|
  std::vector<Index> level_of_scope;  // |S|
  std::vector<Index> level_offsets;   // first scope id per level, plus end
};

/// Contiguous equal blocks per level; position p is in scope
/// floor(p / block_size) of each level. Throws std::invalid_argument when a
/// level does not divide the positions or does not nest in its parent.
ScopeHierarchy build_scope_hierarchy(const GeneratorConfig& config);

/// Independent categorical draw per position.
Assignment sample_prior_mapping(const GeneratorConfig& config, std::uint64_t seed);

/// Throws std::invalid_argument listing config violations.
ProblemInstance generate_instance(const GeneratorConfig& config, std::uint64_t seed);

/// Seed of instance `index` in a batch rooted at `base_seed`.
std::uint64_t batch_seed(std::uint64_t base_seed, std::uint64_t index);

std::vector<ProblemInstance> generate_batch(const GeneratorConfig& config, std::uint64_t base_seed,
                                            std::size_t count);

}  // namespace rackopt
