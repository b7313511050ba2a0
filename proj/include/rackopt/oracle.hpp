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
#include "rackopt/objective.hpp"

#include <cstdint>
#include <stdexcept>

namespace rackopt {

inline constexpr double kOracleSearchLimit = 1e7;

/// Raised before enumeration when the candidate count exceeds the limit.
class SearchSpaceTooLarge : public std::invalid_argument {
 public:
  explicit SearchSpaceTooLarge(double size);
  double size() const { return size_; }

 private:
  double size_;
};

struct OracleResult {
  Assignment optimal_assignment;
  ObjectiveBreakdown optimal_breakdown;
  double optimal_value = 0.0;
  std::uint64_t search_space_size = 0;
};

/// prod_k C(|P| - d_0 - ... - d_{k-1}, d_k); zero when the demands exceed
/// the positions.
double oracle_search_space(const ProblemInstance& instance);

/// Exact minimizer of f over assignments with exactly d_k racks of type k
/// and at most one rack per position. Types are enumerated in ascending
/// order, each over its position combinations in lexicographic order; the
/// first minimizer wins.
OracleResult brute_force_solve(const ProblemInstance& instance, const ObjectiveOptions& options = {},
                               double limit = kOracleSearchLimit);

/// (f(assignment) - f*) / max(1, |f*|). The assignment must hold exactly d_k
/// racks of each type with no stacked positions (std::invalid_argument
/// otherwise); a negative gap throws std::logic_error.
double optimality_gap(const ProblemInstance& instance, const Assignment& assignment,
                      const OracleResult& optimum, const ObjectiveOptions& options = {});
double optimality_gap(const ProblemInstance& instance, const Assignment& assignment,
                      const ObjectiveOptions& options = {});

}  // namespace rackopt
