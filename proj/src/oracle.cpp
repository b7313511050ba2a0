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

#include "rackopt/oracle.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rackopt {

namespace {

class Enumerator {
 public:
  Enumerator(const ProblemInstance& instance, const ObjectiveOptions& options)
      : instance_(instance),
        options_(options),
        current_(Assignment::empty(instance.num_positions, instance.num_rack_types)),
        taken_(static_cast<std::size_t>(instance.num_positions), 0) {}

  OracleResult run() {
    place_type(0);
    best_.search_space_size = visited_;
    return best_;
  }

 private:
  void place_type(Index k) {
    if (k == instance_.num_rack_types) {
      evaluate();
      return;
    }
    choose(k, 0, instance_.demands[k]);
  }

  // Picks `left` more positions for type k from [from, |P|).
  void choose(Index k, Index from, int left) {
    if (left == 0) {
      place_type(k + 1);
      return;
    }
    for (Index p = from; p < instance_.num_positions; ++p) {
      if (taken_[p]) continue;
      taken_[p] = 1;
      current_.place(p, k);
      choose(k, p + 1, left - 1);
      current_.clear(p, k);
      taken_[p] = 0;
    }
  }

  void evaluate() {
    ++visited_;
    const ObjectiveBreakdown b = total_utility(instance_, current_, options_);
    if (visited_ == 1 || b.augmented < best_.optimal_value) {
      best_.optimal_assignment = current_;
      best_.optimal_breakdown = b;
      best_.optimal_value = b.augmented;
    }
  }

  const ProblemInstance& instance_;
  ObjectiveOptions options_;
  Assignment current_;
  std::vector<char> taken_;
  OracleResult best_;
  std::uint64_t visited_ = 0;
};

}  // namespace

SearchSpaceTooLarge::SearchSpaceTooLarge(double size)
    : std::invalid_argument("oracle search space of " + std::to_string(size) +
                            " candidates exceeds the enumeration limit"),
      size_(size) {}

double oracle_search_space(const ProblemInstance& instance) {
  double size = 1.0;
  Index remaining = instance.num_positions;
  for (Index k = 0; k < instance.num_rack_types; ++k) {
    const Index d = instance.demands[k];
    if (d > remaining) return 0.0;
    // log-gamma keeps huge counts finite for the guard message.
    size *= std::round(std::exp(std::lgamma(remaining + 1.0) - std::lgamma(d + 1.0) -
                                std::lgamma(remaining - d + 1.0)));
    remaining -= d;
  }
  return size;
}

OracleResult brute_force_solve(const ProblemInstance& instance, const ObjectiveOptions& options,
                               double limit) {
  const auto problems = validate_instance(instance);
  if (!problems.empty()) throw std::invalid_argument("invalid instance: " + problems.front());
  const double size = oracle_search_space(instance);
  if (size > limit) throw SearchSpaceTooLarge(size);
  if (size == 0.0) throw std::invalid_argument("demands exceed the number of positions");
  return Enumerator(instance, options).run();
}

double optimality_gap(const ProblemInstance& instance, const Assignment& assignment,
                      const OracleResult& optimum, const ObjectiveOptions& options) {
  if (!check_g1(assignment).empty() || type_counts(assignment) != instance.demands) {
    throw std::invalid_argument("assignment is outside the oracle's feasible set (exact counts, g1)");
  }
  const double f = total_utility(instance, assignment, options).augmented;
  const double gap = (f - optimum.optimal_value) / std::max(1.0, std::abs(optimum.optimal_value));
  if (gap < 0.0) {
    throw std::logic_error("assignment beats the enumerated optimum; the oracle is inconsistent");
  }
  return gap;
}

double optimality_gap(const ProblemInstance& instance, const Assignment& assignment,
                      const ObjectiveOptions& options) {
  return optimality_gap(instance, assignment, brute_force_solve(instance, options), options);
}

}  // namespace rackopt
