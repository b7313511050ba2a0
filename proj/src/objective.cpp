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

#include "rackopt/objective.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rackopt {

namespace {

void require_shape(const ProblemInstance& instance, const Assignment& assignment) {
  if (assignment.num_positions() != instance.num_positions ||
      assignment.num_types() != instance.num_rack_types) {
    throw std::invalid_argument("assignment shape does not match instance");
  }
}

// d std / d u_j for population std; zero at zero variance.
Eigen::VectorXd std_gradient(const Eigen::VectorXd& u) {
  const double n = static_cast<double>(u.size());
  const double mean = u.mean();
  const double sigma = population_std({u.data(), static_cast<std::size_t>(u.size())});
  if (sigma == 0.0) return Eigen::VectorXd::Zero(u.size());
  return (u.array() - mean) / (n * sigma);
}

}  // namespace

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

Eigen::SparseMatrix<double> scope_incidence(const ProblemInstance& instance) {
  const BoolMatrix& m = instance.scope_membership;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index s = 0; s < m.cols(); ++s) {
    for (Index p = 0; p < m.rows(); ++p) {
      if (m(p, s)) triplets.emplace_back(p, s, 1.0);
    }
  }
  Eigen::SparseMatrix<double> out(m.rows(), m.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::MatrixXd scope_usage(const ProblemInstance& instance, const Assignment& assignment) {
  require_shape(instance, assignment);
  const Eigen::SparseMatrix<double> S = scope_incidence(instance);
  const Eigen::MatrixXd per_scope_types = S.transpose() * assignment.entries();
  return per_scope_types * instance.resource_matrix;
}

Eigen::VectorXd group_utilization(const ProblemInstance& instance, const Assignment& assignment,
                                  const SpreadRequirement& req) {
  require_shape(instance, assignment);
  Eigen::VectorXd type_weight = Eigen::VectorXd::Zero(instance.num_rack_types);
  for (Index k : req.rack_group) type_weight[k] = instance.resource_matrix(k, req.resource);
  const Eigen::VectorXd per_position = assignment.entries() * type_weight;

  Eigen::VectorXd u(static_cast<Index>(req.scope_group.size()));
  for (std::size_t j = 0; j < req.scope_group.size(); ++j) {
    const auto col = instance.scope_membership.col(req.scope_group[j]);
    u[j] = col.cast<double>().dot(per_position);
  }
  return u;
}

double movement_cost(const ProblemInstance& instance, const Assignment& assignment) {
  require_shape(instance, assignment);
  const Eigen::MatrixXd removed =
      (instance.prior_assignment.entries() - assignment.entries()).cwiseMax(0.0);
  return (removed * instance.movement_weights).sum();
}

double spread_metric(const ProblemInstance& instance, const Assignment& assignment,
                     const SpreadRequirement& req) {
  const Eigen::VectorXd u = group_utilization(instance, assignment, req);
  return population_std({u.data(), static_cast<std::size_t>(u.size())});
}

LimitPenaltyResult limit_penalty(const ProblemInstance& instance, const Assignment& assignment,
                                 const ObjectiveOptions& options) {
  const Eigen::MatrixXd excess = scope_usage(instance, assignment) - instance.scope_limits;
  LimitPenaltyResult out;
  out.cells = excess.unaryExpr([&](double z) { return limit_penalty_value(z, options.penalty); });
  out.total = out.cells.sum();
  return out;
}

double placement_slack(const ProblemInstance& instance, const Assignment& assignment) {
  require_shape(instance, assignment);
  const Eigen::VectorXd delta = assignment.counts() - instance.prior_assignment.counts();
  return delta.cwiseMax(0.0).sum() - static_cast<double>(instance.placement_limit);
}

ObjectiveBreakdown total_utility(const ProblemInstance& instance, const Assignment& assignment,
                                 const ObjectiveOptions& options) {
  ObjectiveBreakdown b;
  b.movement = movement_cost(instance, assignment);
  for (const SpreadRequirement& req : instance.spread_requirements) {
    b.spread += spread_metric(instance, assignment, req);
  }
  b.limit_penalty = limit_penalty(instance, assignment, options).total;
  b.placement_excess = std::max(0.0, placement_slack(instance, assignment));
  b.utility = b.movement + instance.beta_spread * b.spread + instance.beta_limit * b.limit_penalty;
  b.augmented = b.utility + instance.gamma_placement * b.placement_excess;
  return b;
}

GradientField gradient(const ProblemInstance& instance, const Assignment& assignment,
                       Index free_type, std::span<const Index> frozen_types,
                       const ObjectiveOptions& options) {
  require_shape(instance, assignment);
  if (assignment.entries().hasNaN()) throw std::invalid_argument("assignment contains NaN");
  if (free_type < 0 || free_type >= instance.num_rack_types) {
    throw std::invalid_argument("free_type out of range");
  }
  if (std::find(frozen_types.begin(), frozen_types.end(), free_type) != frozen_types.end()) {
    throw std::invalid_argument("free_type is frozen");
  }

  const Eigen::SparseMatrix<double> S = scope_incidence(instance);
  const Eigen::MatrixXd& X = assignment.entries();
  const Eigen::MatrixXd& R = instance.resource_matrix;

  // Limit penalty: d/dX of sum zeta(S^T X R - L) = S * zeta'(.) * R^T.
  const Eigen::MatrixXd usage = (S.transpose() * X) * R;
  const Eigen::MatrixXd slope = (usage - instance.scope_limits).unaryExpr([&](double z) {
    return limit_penalty_slope(z, options.penalty);
  });
  const Eigen::MatrixXd scope_type = slope * R.transpose();
  Eigen::MatrixXd grad = instance.beta_limit * (S * scope_type);

  // Spread: the utilization of scope c_j is a linear function of X, so the
  // chain rule gives (S v) w^T with v the std gradient scattered on scopes.
  for (const SpreadRequirement& req : instance.spread_requirements) {
    const Eigen::VectorXd dstd = std_gradient(group_utilization(instance, assignment, req));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(instance.num_scopes());
    for (std::size_t j = 0; j < req.scope_group.size(); ++j) v[req.scope_group[j]] = dstd[j];
    Eigen::VectorXd w = Eigen::VectorXd::Zero(instance.num_rack_types);
    for (Index k : req.rack_group) w[k] = R(k, req.resource);
    grad.noalias() += instance.beta_spread * (S * v) * w.transpose();
  }

  // Movement: d/dx M_k max(0, prior - x) = -M_k where prior - x > 0.
  const Eigen::MatrixXd& prior = instance.prior_assignment.entries();
  for (Index k = 0; k < X.cols(); ++k) {
    const double m = instance.movement_weights[k];
    for (Index p = 0; p < X.rows(); ++p) {
      if (prior(p, k) - X(p, k) > 0.0) grad(p, k) -= m;
    }
  }

  // Placement hinge.
  if (placement_slack(instance, assignment) > 0.0) {
    const Eigen::VectorXd delta = assignment.counts() - instance.prior_assignment.counts();
    for (Index k = 0; k < X.cols(); ++k) {
      if (delta[k] > 0.0) grad.col(k).array() += instance.gamma_placement;
    }
  }

  return {std::move(grad), assignment};
}

double finite_difference_check(const ProblemInstance& instance, const Assignment& assignment,
                               double step, const ObjectiveOptions& options) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  const Eigen::MatrixXd analytic = gradient(instance, assignment, 0, {}, options).values;
  IncrementalObjective probe(instance, assignment.as_relaxed(), options);
  double worst = 0.0;
  for (Index k = 0; k < assignment.num_types(); ++k) {
    for (Index p = 0; p < assignment.num_positions(); ++p) {
      const double x = assignment(p, k);
      probe.set(p, k, x + step);
      const double up = probe.augmented();
      probe.set(p, k, x - step);
      const double down = probe.augmented();
      probe.set(p, k, x);
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic(p, k);
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

IncrementalObjective::IncrementalObjective(const ProblemInstance& instance, Assignment start,
                                           ObjectiveOptions options)
    : instance_(&instance),
      options_(options),
      scopes_(instance.scope_membership),
      assignment_(std::move(start)) {
  require_shape(instance, assignment_);
  usage_ = scope_usage(instance, assignment_);
  penalty_cells_.resize(usage_.rows(), usage_.cols());
  for (Index r = 0; r < usage_.cols(); ++r) {
    for (Index s = 0; s < usage_.rows(); ++s) {
      penalty_cells_(s, r) = limit_penalty_value(usage_(s, r) - instance.scope_limits(s, r), options_.penalty);
    }
  }
  counts_ = assignment_.counts();
  prior_counts_ = instance.prior_assignment.counts();
  movement_ = movement_cost(instance, assignment_);
  groups_.reserve(instance.spread_requirements.size());
  for (const SpreadRequirement& req : instance.spread_requirements) {
    GroupState g;
    g.has_type.assign(instance.num_rack_types, 0);
    for (Index k : req.rack_group) g.has_type[k] = 1;
    g.local_of_scope.assign(instance.num_scopes(), -1);
    for (std::size_t j = 0; j < req.scope_group.size(); ++j) {
      g.local_of_scope[req.scope_group[j]] = static_cast<Index>(j);
    }
    g.utilization = group_utilization(instance, assignment_, req);
    groups_.push_back(std::move(g));
  }
}

void IncrementalObjective::set(Index p, Index k, double value) {
  const double old = assignment_(p, k);
  if (old == value) return;
  const double delta = value - old;
  const ProblemInstance& in = *instance_;
  const double prior = in.prior_assignment(p, k);
  movement_ += in.movement_weights[k] *
               (std::max(0.0, prior - value) - std::max(0.0, prior - old));
  counts_[k] += delta;
  const auto resources = in.resource_matrix.row(k);
  for (Index s : scopes_.scopes_of(p)) {
    usage_.row(s) += delta * resources;
    for (Index r = 0; r < usage_.cols(); ++r) {
      if (resources[r] == 0.0) continue;
      penalty_cells_(s, r) = limit_penalty_value(usage_(s, r) - in.scope_limits(s, r), options_.penalty);
    }
  }
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    GroupState& g = groups_[i];
    if (!g.has_type[k]) continue;
    const double amount = delta * in.resource_matrix(k, in.spread_requirements[i].resource);
    for (Index s : scopes_.scopes_of(p)) {
      const Index j = g.local_of_scope[s];
      if (j >= 0) g.utilization[j] += amount;
    }
  }
  assignment_.set(p, k, value);
}

ObjectiveBreakdown IncrementalObjective::breakdown() const {
  const ProblemInstance& in = *instance_;
  ObjectiveBreakdown b;
  b.movement = movement_;
  for (const GroupState& g : groups_) {
    b.spread += population_std({g.utilization.data(), static_cast<std::size_t>(g.utilization.size())});
  }
  for (Index r = 0; r < usage_.cols(); ++r) {
    for (Index s = 0; s < usage_.rows(); ++s) {
      b.limit_penalty += penalty_cells_(s, r);
    }
  }
  const double slack = (counts_ - prior_counts_).cwiseMax(0.0).sum() -
                       static_cast<double>(in.placement_limit);
  b.placement_excess = std::max(0.0, slack);
  b.utility = b.movement + in.beta_spread * b.spread + in.beta_limit * b.limit_penalty;
  b.augmented = b.utility + in.gamma_placement * b.placement_excess;
  return b;
}

Eigen::VectorXd IncrementalObjective::scope_sensitivity(Index k) const {
  const ProblemInstance& in = *instance_;
  const Index S = usage_.rows();
  Eigen::VectorXd sens = Eigen::VectorXd::Zero(S);
  for (Index r = 0; r < usage_.cols(); ++r) {
    const double weight = in.resource_matrix(k, r);
    if (weight == 0.0) continue;
    for (Index s = 0; s < S; ++s) {
      sens[s] += weight * limit_penalty_slope(usage_(s, r) - in.scope_limits(s, r), options_.penalty);
    }
  }
  sens *= in.beta_limit;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const GroupState& g = groups_[i];
    const SpreadRequirement& req = in.spread_requirements[i];
    const double weight = in.resource_matrix(k, req.resource);
    if (!g.has_type[k] || weight == 0.0) continue;
    const Eigen::VectorXd dstd = std_gradient(g.utilization);
    for (std::size_t j = 0; j < req.scope_group.size(); ++j) {
      sens[req.scope_group[j]] += in.beta_spread * weight * dstd[j];
    }
  }
  return sens;
}

double IncrementalObjective::type_offset(Index k) const {
  const ProblemInstance& in = *instance_;
  const double slack = (counts_ - prior_counts_).cwiseMax(0.0).sum() -
                       static_cast<double>(in.placement_limit);
  if (slack > 0.0 && counts_[k] - prior_counts_[k] > 0.0) return in.gamma_placement;
  return 0.0;
}

double IncrementalObjective::partial(Index p, Index k, const Eigen::VectorXd& sensitivity,
                                     double offset) const {
  double g = offset;
  if (instance_->prior_assignment(p, k) - assignment_(p, k) > 0.0) {
    g -= instance_->movement_weights[k];
  }
  for (Index s : scopes_.scopes_of(p)) g += sensitivity[s];
  return g;
}

Eigen::VectorXd IncrementalObjective::gradient_column(Index k) const {
  const Eigen::VectorXd sens = scope_sensitivity(k);
  const double offset = type_offset(k);
  Eigen::VectorXd col(assignment_.num_positions());
  for (Index p = 0; p < col.size(); ++p) col[p] = partial(p, k, sens, offset);
  return col;
}

}  // namespace rackopt
