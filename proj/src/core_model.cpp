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

#include "rackopt/core_model.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace rackopt {

namespace {

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream out;
  (out << ... << parts);
  return out.str();
}

void check_shape(std::vector<std::string>& out, const char* field, Index rows, Index cols,
                 Index want_rows, Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    out.push_back(cat(field, " has shape ", rows, "x", cols, ", expected ", want_rows, "x",
                      want_cols));
  }
}

template <typename Derived>
void check_non_negative(std::vector<std::string>& out, const char* field,
                        const Eigen::DenseBase<Derived>& m) {
  constexpr bool is_vector = Derived::ColsAtCompileTime == 1;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = static_cast<double>(m(i, j));
      if (!(v >= 0.0)) {
        if (is_vector) {
          out.push_back(cat(field, "[", i, "] = ", v, " is negative or NaN"));
        } else {
          out.push_back(cat(field, "[", i, "][", j, "] = ", v, " is negative or NaN"));
        }
      }
    }
  }
}

}  // namespace

std::optional<Index> Assignment::occupant(Index p) const {
  for (Index k = 0; k < entries_.cols(); ++k) {
    if (entries_(p, k) > 0.5) return k;
  }
  return std::nullopt;
}

std::vector<std::string> Assignment::violations() const {
  std::vector<std::string> out;
  for (Index p = 0; p < entries_.rows(); ++p) {
    double row = 0.0;
    for (Index k = 0; k < entries_.cols(); ++k) {
      const double v = entries_(p, k);
      if (is_binary() && v != 0.0 && v != 1.0) {
        out.push_back(cat("entries[", p, "][", k, "] = ", v, " is not binary"));
      } else if (!(v >= 0.0 && v <= 1.0)) {
        out.push_back(cat("entries[", p, "][", k, "] = ", v, " outside [0, 1]"));
      }
      row += v;
    }
    const double limit = is_binary() ? 1.0 : 1.0 + kRelaxedRowTolerance;
    if (row > limit) out.push_back(cat("row ", p, " sums to ", row));
  }
  return out;
}

bool ProblemInstance::operator==(const ProblemInstance& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return num_positions == o.num_positions && num_rack_types == o.num_rack_types &&
         num_resources == o.num_resources && same(resource_matrix, o.resource_matrix) &&
         same(scope_membership, o.scope_membership) && same(scope_limits, o.scope_limits) &&
         same(demands, o.demands) && placement_limit == o.placement_limit &&
         same(movement_weights, o.movement_weights) &&
         spread_requirements == o.spread_requirements && prior_assignment == o.prior_assignment &&
         beta_spread == o.beta_spread && beta_limit == o.beta_limit &&
         gamma_placement == o.gamma_placement && seed == o.seed;
}

ScopeIndex::ScopeIndex(const BoolMatrix& membership) {
  const Index positions = membership.rows();
  const Index scopes = membership.cols();
  pos_offsets_.assign(positions + 1, 0);
  scope_offsets_.assign(scopes + 1, 0);
  for (Index s = 0; s < scopes; ++s) {
    for (Index p = 0; p < positions; ++p) {
      if (membership(p, s)) {
        ++pos_offsets_[p + 1];
        ++scope_offsets_[s + 1];
      }
    }
  }
  for (Index p = 0; p < positions; ++p) pos_offsets_[p + 1] += pos_offsets_[p];
  for (Index s = 0; s < scopes; ++s) scope_offsets_[s + 1] += scope_offsets_[s];
  scope_ids_.resize(pos_offsets_.back());
  position_ids_.resize(scope_offsets_.back());

  std::vector<Index> pos_fill(pos_offsets_.begin(), pos_offsets_.end() - 1);
  std::vector<Index> scope_fill(scope_offsets_.begin(), scope_offsets_.end() - 1);
  // Column-major walk keeps both lists sorted ascending.
  for (Index s = 0; s < scopes; ++s) {
    for (Index p = 0; p < positions; ++p) {
      if (membership(p, s)) {
        scope_ids_[pos_fill[p]++] = s;
        position_ids_[scope_fill[s]++] = p;
      }
    }
  }
}

std::vector<std::string> validate_instance(const ProblemInstance& in) {
  std::vector<std::string> out;
  const Index P = in.num_positions;
  const Index K = in.num_rack_types;
  const Index R = in.num_resources;
  const Index S = in.scope_membership.cols();

  if (P < 0) out.push_back(cat("num_positions = ", P, " is negative"));
  if (K < 0) out.push_back(cat("num_rack_types = ", K, " is negative"));
  if (R < 0) out.push_back(cat("num_resources = ", R, " is negative"));

  check_shape(out, "resource_matrix", in.resource_matrix.rows(), in.resource_matrix.cols(), K, R);
  if (in.scope_membership.rows() != P) {
    out.push_back(cat("scope_membership has ", in.scope_membership.rows(), " rows, expected ", P));
  }
  check_shape(out, "scope_limits", in.scope_limits.rows(), in.scope_limits.cols(), S, R);
  check_shape(out, "demands", in.demands.rows(), 1, K, 1);
  check_shape(out, "movement_weights", in.movement_weights.rows(), 1, K, 1);
  check_shape(out, "prior_assignment", in.prior_assignment.num_positions(),
              in.prior_assignment.num_types(), P, K);
  const bool shapes_ok = out.empty();

  check_non_negative(out, "resource_matrix", in.resource_matrix);
  check_non_negative(out, "scope_limits", in.scope_limits);
  check_non_negative(out, "demands", in.demands);
  check_non_negative(out, "movement_weights", in.movement_weights);
  if (in.placement_limit < 0) {
    out.push_back(cat("placement_limit = ", in.placement_limit, " is negative"));
  }
  if (!(in.beta_spread >= 0.0)) out.push_back(cat("beta_spread = ", in.beta_spread, " is negative"));
  if (!(in.beta_limit >= 0.0)) out.push_back(cat("beta_limit = ", in.beta_limit, " is negative"));
  if (!(in.gamma_placement >= 0.0)) {
    out.push_back(cat("gamma_placement = ", in.gamma_placement, " is negative"));
  }

  const Eigen::MatrixXd& prior = in.prior_assignment.entries();
  for (Index p = 0; p < prior.rows(); ++p) {
    double row = 0.0;
    for (Index k = 0; k < prior.cols(); ++k) {
      const double v = prior(p, k);
      if (!(v >= 0.0 && v <= 1.0)) {
        out.push_back(cat("prior_assignment[", p, "][", k, "] = ", v, " outside [0, 1]"));
      }
      row += v;
    }
    if (row > 1.0) out.push_back(cat("prior_assignment row ", p, " sums to ", row));
  }

  for (std::size_t i = 0; i < in.spread_requirements.size(); ++i) {
    const SpreadRequirement& req = in.spread_requirements[i];
    const std::string name = cat("spread_requirements[", i, "]");
    if (req.resource < 0 || req.resource >= R) {
      out.push_back(cat(name, ".resource = ", req.resource, " out of range"));
    }
    if (req.rack_group.empty()) out.push_back(cat(name, ".rack_group is empty"));
    for (Index k : req.rack_group) {
      if (k < 0 || k >= K) out.push_back(cat(name, ".rack_group contains ", k, " out of range"));
    }
    if (req.scope_group.size() < 2) out.push_back(cat(name, ".scope_group has fewer than 2 scopes"));
    bool scopes_in_range = true;
    for (Index s : req.scope_group) {
      if (s < 0 || s >= S) {
        out.push_back(cat(name, ".scope_group contains ", s, " out of range"));
        scopes_in_range = false;
      }
    }
    if (!scopes_in_range || !shapes_ok) continue;
    for (std::size_t a = 0; a < req.scope_group.size(); ++a) {
      for (std::size_t b = a + 1; b < req.scope_group.size(); ++b) {
        const Index sa = req.scope_group[a];
        const Index sb = req.scope_group[b];
        if ((in.scope_membership.col(sa).array() && in.scope_membership.col(sb).array()).any()) {
          out.push_back(cat(name, ".scope_group scopes ", sa, " and ", sb, " overlap"));
        }
      }
    }
  }
  return out;
}

std::vector<Index> check_g1(const Assignment& assignment) {
  if (!assignment.is_binary()) throw std::invalid_argument("check_g1 requires a binary assignment");
  std::vector<Index> out;
  const Eigen::VectorXd rows = assignment.entries().rowwise().sum();
  for (Index p = 0; p < rows.size(); ++p) {
    if (rows[p] > 1.0) out.push_back(p);
  }
  return out;
}

Eigen::VectorXi type_counts(const Assignment& assignment) {
  return assignment.counts().array().round().cast<int>();
}

Eigen::VectorXi check_g2(const ProblemInstance& instance, const Assignment& assignment) {
  return (instance.demands - type_counts(assignment)).cwiseMax(0);
}

int check_g3(const ProblemInstance& instance, const Assignment& assignment) {
  const Eigen::VectorXi delta = type_counts(assignment) - type_counts(instance.prior_assignment);
  return delta.cwiseMax(0).sum() - instance.placement_limit;
}

ConstraintReport check_constraints(const ProblemInstance& instance, const Assignment& assignment) {
  ConstraintReport report;
  report.g1_violations = check_g1(assignment);
  report.g2_shortfalls = check_g2(instance, assignment);
  report.g3_excess = std::max(0, check_g3(instance, assignment));
  return report;
}

}  // namespace rackopt
