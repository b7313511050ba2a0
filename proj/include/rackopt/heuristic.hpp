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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rackopt {

enum class TieBreak { kLowestIndex, kSeededRandom };

enum class SwapAcceptance {
  /// Revert an adjustment swap that strictly increases f.
  kRevertWorsening,
  /// Apply every swap as computed.
  kUnconditional,
};

struct HeuristicConfig {
  int adjustment_rounds = 2;
  TieBreak tie_break = TieBreak::kLowestIndex;
  std::uint64_t tie_seed = 0;
  SwapAcceptance swap_acceptance = SwapAcceptance::kRevertWorsening;
  ObjectiveOptions objective;
};

/// Raised when a rack type's demand cannot be met from its current racks
/// plus the vacant positions.
class InfeasibleDemandError : public std::runtime_error {
 public:
  InfeasibleDemandError(Index rack_type, int demand, int available);
  Index rack_type() const { return rack_type_; }

 private:
  Index rack_type_;
};

struct SubproblemState {
  Assignment assignment;
  std::vector<Index> solved_types;
  Index current_type = 0;
  int adjustment_rounds = 2;
};

/// Flip counts recorded while solving one rack type.
struct SubproblemStats {
  int additions = 0;
  int removals = 0;
  int swaps_applied = 0;
  int swaps_reverted = 0;
};

/// Brings the count of state.current_type to its demand with one flip per
/// gradient evaluation, then runs the adjustment swaps. On return the type
/// is appended to solved_types and the assignment is updated in place.
Assignment solve_subproblem(const ProblemInstance& instance, SubproblemState& state,
                            const HeuristicConfig& config = {});

struct SolveResult {
  Assignment assignment;
  ObjectiveBreakdown breakdown;
  std::vector<SubproblemStats> stats;  // in solve order
};

/// Solves every rack type in `order`, starting from the prior mapping.
SolveResult solve_ordered(const ProblemInstance& instance, std::span<const Index> order,
                          const HeuristicConfig& config = {});

/// 0, 1, ..., |K| - 1.
std::vector<Index> identity_order(Index num_types);

bool is_permutation_of_types(std::span<const Index> order, Index num_types);

}  // namespace rackopt
