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

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rackopt {

using Index = Eigen::Index;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Fault-tolerance requirement: resource `resource` contributed by the rack
/// types in `rack_group` should be evenly spread over the (disjoint) scopes
/// in `scope_group`.
struct SpreadRequirement {
  Index resource = 0;
  std::vector<Index> rack_group;
  std::vector<Index> scope_group;

  bool operator==(const SpreadRequirement&) const = default;
};

enum class AssignmentMode { kBinary, kRelaxed };

/// Position-to-rack-type mapping, |P| x |K|. Binary assignments hold 0/1
/// entries; relaxed ones hold values in [0, 1] and are what gradients are
/// taken against.
class Assignment {
 public:
  static constexpr double kRelaxedRowTolerance = 1e-9;

  Assignment() = default;
  Assignment(Eigen::MatrixXd entries, AssignmentMode mode)
      : entries_(std::move(entries)), mode_(mode) {}

  static Assignment empty(Index positions, Index types) {
    return {Eigen::MatrixXd::Zero(positions, types), AssignmentMode::kBinary};
  }

  Index num_positions() const { return entries_.rows(); }
  Index num_types() const { return entries_.cols(); }
  AssignmentMode mode() const { return mode_; }
  bool is_binary() const { return mode_ == AssignmentMode::kBinary; }

  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(Index p, Index k) const { return entries_(p, k); }

  void set(Index p, Index k, double value) { entries_(p, k) = value; }
  void place(Index p, Index k) { entries_(p, k) = 1.0; }
  void clear(Index p, Index k) { entries_(p, k) = 0.0; }

  /// Column sums (rack count per type).
  Eigen::VectorXd counts() const { return entries_.colwise().sum().transpose(); }
  double count(Index k) const { return entries_.col(k).sum(); }

  /// Rack type at `p` for a binary assignment, or nullopt when vacant.
  std::optional<Index> occupant(Index p) const;

  Assignment as_relaxed() const { return {entries_, AssignmentMode::kRelaxed}; }

  /// Invariant violations: non-binary entries in binary mode, entries outside
  /// [0, 1], and rows summing above one.
  std::vector<std::string> violations() const;

  bool operator==(const Assignment& other) const {
    return mode_ == other.mode_ && entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() && entries_ == other.entries_;
  }

 private:
  Eigen::MatrixXd entries_;
  AssignmentMode mode_ = AssignmentMode::kBinary;
};

/// Immutable description of one placement round. Matrices follow the
/// conventions: resource_matrix |K| x |R|, scope_membership |P| x |S|,
/// scope_limits |S| x |R|.
struct ProblemInstance {
  Index num_positions = 0;
  Index num_rack_types = 0;
  Index num_resources = 0;

  Eigen::MatrixXd resource_matrix;
  BoolMatrix scope_membership;
  Eigen::MatrixXd scope_limits;
  Eigen::VectorXi demands;
  int placement_limit = 0;
  Eigen::VectorXd movement_weights;
  std::vector<SpreadRequirement> spread_requirements;
  Assignment prior_assignment;

  double beta_spread = 1.0;
  double beta_limit = 1.0;
  double gamma_placement = 0.0;

  std::optional<std::uint64_t> seed;

  Index num_scopes() const { return scope_membership.cols(); }

  bool operator==(const ProblemInstance&) const;
};

/// Compressed position<->scope incidence derived from scope_membership.
class ScopeIndex {
 public:
  explicit ScopeIndex(const BoolMatrix& membership);

  std::span<const Index> scopes_of(Index position) const {
    return {scope_ids_.data() + pos_offsets_[position],
            scope_ids_.data() + pos_offsets_[position + 1]};
  }
  std::span<const Index> positions_in(Index scope) const {
    return {position_ids_.data() + scope_offsets_[scope],
            position_ids_.data() + scope_offsets_[scope + 1]};
  }
  Index num_positions() const { return static_cast<Index>(pos_offsets_.size()) - 1; }
  Index num_scopes() const { return static_cast<Index>(scope_offsets_.size()) - 1; }

 private:
  std::vector<Index> pos_offsets_;
  std::vector<Index> scope_ids_;
  std::vector<Index> scope_offsets_;
  std::vector<Index> position_ids_;
};

/// Each entry names the offending field and index, e.g. "demands[0] < 0".
/// Empty iff every instance invariant holds.
std::vector<std::string> validate_instance(const ProblemInstance& instance);

struct ConstraintReport {
  std::vector<Index> g1_violations;
  Eigen::VectorXi g2_shortfalls;
  int g3_excess = 0;

  bool satisfied() const {
    return g1_violations.empty() && (g2_shortfalls.array() == 0).all() && g3_excess == 0;
  }
};

/// Positions holding more than one rack. Throws std::invalid_argument for a
/// relaxed assignment.
std::vector<Index> check_g1(const Assignment& assignment);

/// max(0, d_k - count_k) per type.
Eigen::VectorXi check_g2(const ProblemInstance& instance, const Assignment& assignment);

/// New placements over the prior mapping minus the placement limit; positive
/// means violated.
int check_g3(const ProblemInstance& instance, const Assignment& assignment);

ConstraintReport check_constraints(const ProblemInstance& instance, const Assignment& assignment);

/// Integer rack counts per type of a binary assignment.
Eigen::VectorXi type_counts(const Assignment& assignment);

}  // namespace rackopt
