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

#include <Eigen/SparseCore>

#include <cmath>
#include <span>
#include <vector>

namespace rackopt {

/// Penalty applied to (usage - limit) per scope/resource cell.
enum class LimitPenalty { kSoftplus, kHinge };

struct ObjectiveOptions {
  LimitPenalty penalty = LimitPenalty::kSoftplus;
};

struct ObjectiveBreakdown {
  double movement = 0.0;
  double spread = 0.0;
  double limit_penalty = 0.0;
  /// max(0, new placements - q).
  double placement_excess = 0.0;
  /// movement + beta_spread * spread + beta_limit * limit_penalty.
  double utility = 0.0;
  /// utility + gamma_placement * placement_excess.
  double augmented = 0.0;
};

struct LimitPenaltyResult {
  double total = 0.0;
  Eigen::MatrixXd cells;  // |S| x |R|
};

struct GradientField {
  Eigen::MatrixXd values;  // |P| x |K|, df/dx_{p,k}
  Assignment evaluated_at;
};

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double limit_penalty_value(double z, LimitPenalty kind) {
  return kind == LimitPenalty::kSoftplus ? softplus(z) : std::max(0.0, z);
}

/// Derivative of the cell penalty; the hinge uses 0 at its kink.
inline double limit_penalty_slope(double z, LimitPenalty kind) {
  return kind == LimitPenalty::kSoftplus ? sigmoid(z) : (z > 0.0 ? 1.0 : 0.0);
}

/// Population standard deviation.
double population_std(std::span<const double> values);

/// Sparse double copy of scope_membership (|P| x |S|).
Eigen::SparseMatrix<double> scope_incidence(const ProblemInstance& instance);

/// Usage matrix S^T X R, |S| x |R|.
Eigen::MatrixXd scope_usage(const ProblemInstance& instance, const Assignment& assignment);

/// Utilization of `req.resource` from `req.rack_group` in each scope of
/// `req.scope_group`, in scope_group order.
Eigen::VectorXd group_utilization(const ProblemInstance& instance, const Assignment& assignment,
                                  const SpreadRequirement& req);

/// Sum over positions/types of M_k * max(0, prior - x): removals cost,
/// placements are free.
double movement_cost(const ProblemInstance& instance, const Assignment& assignment);

double spread_metric(const ProblemInstance& instance, const Assignment& assignment,
                     const SpreadRequirement& req);

LimitPenaltyResult limit_penalty(const ProblemInstance& instance, const Assignment& assignment,
                                 const ObjectiveOptions& options = {});

/// Sum over types of max(0, count_k - prior_count_k) minus q, on relaxed counts.
double placement_slack(const ProblemInstance& instance, const Assignment& assignment);

ObjectiveBreakdown total_utility(const ProblemInstance& instance, const Assignment& assignment,
                                 const ObjectiveOptions& options = {});

/// Reverse-mode gradient of the augmented objective with respect to every
/// entry of `assignment`. Kinks take derivative 0; the spread term
/// contributes 0 at zero variance. Throws std::invalid_argument on NaN
/// entries, a bad free_type, or free_type listed among frozen_types.
GradientField gradient(const ProblemInstance& instance, const Assignment& assignment,
                       Index free_type, std::span<const Index> frozen_types = {},
                       const ObjectiveOptions& options = {});

/// Max over entries of |analytic - central difference| / max(1, |analytic|).
double finite_difference_check(const ProblemInstance& instance, const Assignment& assignment,
                               double step, const ObjectiveOptions& options = {});

/// Objective state maintained under single-entry updates. Holds the usage
/// matrix, group utilizations, type counts and movement so that one flip
/// costs O(scopes-per-position * |R|) and a column of the gradient costs
/// O(|S| * |R|) plus O(1) per queried position. Must stay numerically
/// consistent with the free functions above.
class IncrementalObjective {
 public:
  IncrementalObjective(const ProblemInstance& instance, Assignment start,
                       ObjectiveOptions options = {});

  const ProblemInstance& instance() const { return *instance_; }
  const Assignment& assignment() const { return assignment_; }
  const ScopeIndex& scopes() const { return scopes_; }

  void set(Index p, Index k, double value);

  ObjectiveBreakdown breakdown() const;
  double augmented() const { return breakdown().augmented; }

  /// df/d usage-of-scope contribution for rack type k, one entry per scope.
  /// Combined with partial() to read gradient column k.
  Eigen::VectorXd scope_sensitivity(Index k) const;

  /// Type-k terms that do not depend on the position's scopes.
  double type_offset(Index k) const;

  double partial(Index p, Index k, const Eigen::VectorXd& sensitivity, double offset) const;

  /// Full gradient column k.
  Eigen::VectorXd gradient_column(Index k) const;

 private:
  struct GroupState {
    std::vector<char> has_type;        // |K|
    std::vector<Index> local_of_scope;  // |S|, -1 when outside the group
    Eigen::VectorXd utilization;        // |scope_group|
  };

  const ProblemInstance* instance_;
  ObjectiveOptions options_;
  ScopeIndex scopes_;
  Assignment assignment_;
  Eigen::MatrixXd usage_;
  Eigen::MatrixXd penalty_cells_;
  std::vector<GroupState> groups_;
  Eigen::VectorXd counts_;
  Eigen::VectorXd prior_counts_;
  double movement_ = 0.0;
};

}  // namespace rackopt
