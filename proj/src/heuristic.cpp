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

#include "rackopt/heuristic.hpp"

#include "rackopt/random.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace rackopt {

namespace {

constexpr Index kVacant = -1;

std::string infeasible_message(Index rack_type, int demand, int available) {
  std::ostringstream out;
  out << "rack type " << rack_type << " demands " << demand << " racks but only " << available
      << " positions are available";
  return out.str();
}

std::vector<Index> occupants_of(const Assignment& assignment) {
  if (!assignment.is_binary()) {
    throw std::invalid_argument("heuristic requires a binary assignment");
  }
  if (!check_g1(assignment).empty()) {
    throw std::invalid_argument("heuristic requires an assignment satisfying g1");
  }
  std::vector<Index> out(assignment.num_positions(), kVacant);
  for (Index p = 0; p < assignment.num_positions(); ++p) {
    if (auto k = assignment.occupant(p)) out[p] = *k;
  }
  return out;
}

// Runs the per-type flip loop against a shared incremental objective.
class TypeSolver {
 public:
  TypeSolver(IncrementalObjective& objective, std::vector<Index>& occupant,
             const HeuristicConfig& config)
      : objective_(objective), occupant_(occupant), config_(config) {}

  SubproblemStats solve(Index k, int rounds) {
    SubproblemStats stats;
    rng_ = CounterRng(config_.tie_seed).split(static_cast<std::uint64_t>(k));
    const int demand = objective_.instance().demands[k];
    int current = 0;
    int vacant = 0;
    for (Index occ : occupant_) {
      current += occ == k;
      vacant += occ == kVacant;
    }
    if (demand > current + vacant) throw InfeasibleDemandError(k, demand, current + vacant);

    for (int missing = demand - current; missing > 0; --missing) {
      add_best(k);
      ++stats.additions;
    }
    for (int surplus = current - demand; surplus > 0; --surplus) {
      remove_worst(k);
      ++stats.removals;
    }

    for (int round = 0; round < rounds; ++round) {
      if (std::find(occupant_.begin(), occupant_.end(), k) == occupant_.end()) break;
      const double before = objective_.augmented();
      const Index removed = remove_worst(k);
      const Index added = add_best(k);
      if (added == removed) continue;
      if (config_.swap_acceptance == SwapAcceptance::kRevertWorsening &&
          objective_.augmented() > before) {
        flip(added, k, false);
        flip(removed, k, true);
        ++stats.swaps_reverted;
      } else {
        ++stats.swaps_applied;
      }
    }
    return stats;
  }

 private:
  void flip(Index p, Index k, bool place) {
    objective_.set(p, k, place ? 1.0 : 0.0);
    occupant_[p] = place ? k : kVacant;
  }

  // Vacant position with the most negative partial.
  Index add_best(Index k) {
    const Index p = select(k, kVacant, -1.0);
    flip(p, k, true);
    return p;
  }

  // Type-k position with the most positive partial.
  Index remove_worst(Index k) {
    const Index p = select(k, k, 1.0);
    flip(p, k, false);
    return p;
  }

  // argmax of sign * partial over positions whose occupant equals `mask`.
  Index select(Index k, Index mask, double sign) {
    const Eigen::VectorXd sens = objective_.scope_sensitivity(k);
    const double offset = objective_.type_offset(k);
    Index best = kVacant;
    double best_score = 0.0;
    ties_.clear();
    for (Index p = 0; p < static_cast<Index>(occupant_.size()); ++p) {
      if (occupant_[p] != mask) continue;
      const double score = sign * objective_.partial(p, k, sens, offset);
      if (best == kVacant || score > best_score) {
        best = p;
        best_score = score;
        ties_.clear();
        ties_.push_back(p);
      } else if (score == best_score) {
        ties_.push_back(p);
      }
    }
    if (best == kVacant) throw std::logic_error("no candidate position for flip");
    if (config_.tie_break == TieBreak::kSeededRandom && ties_.size() > 1) {
      const auto pick = rng_.uniform_int(0, static_cast<std::int64_t>(ties_.size()) - 1);
      return ties_[static_cast<std::size_t>(pick)];
    }
    return best;
  }

  IncrementalObjective& objective_;
  std::vector<Index>& occupant_;
  const HeuristicConfig& config_;
  CounterRng rng_{0};
  std::vector<Index> ties_;
};

}  // namespace

InfeasibleDemandError::InfeasibleDemandError(Index rack_type, int demand, int available)
    : std::runtime_error(infeasible_message(rack_type, demand, available)), rack_type_(rack_type) {}

std::vector<Index> identity_order(Index num_types) {
  std::vector<Index> order(static_cast<std::size_t>(num_types));
  std::iota(order.begin(), order.end(), Index{0});
  return order;
}

bool is_permutation_of_types(std::span<const Index> order, Index num_types) {
  if (static_cast<Index>(order.size()) != num_types) return false;
  std::vector<char> seen(static_cast<std::size_t>(num_types), 0);
  for (Index k : order) {
    if (k < 0 || k >= num_types || seen[k]) return false;
    seen[k] = 1;
  }
  return true;
}

Assignment solve_subproblem(const ProblemInstance& instance, SubproblemState& state,
                            const HeuristicConfig& config) {
  const Index k = state.current_type;
  if (k < 0 || k >= instance.num_rack_types) throw std::invalid_argument("current_type out of range");
  if (std::find(state.solved_types.begin(), state.solved_types.end(), k) !=
      state.solved_types.end()) {
    throw std::invalid_argument("current_type already solved");
  }
  std::vector<Index> occupant = occupants_of(state.assignment);
  IncrementalObjective objective(instance, state.assignment, config.objective);
  TypeSolver(objective, occupant, config).solve(k, state.adjustment_rounds);
  state.assignment = objective.assignment();
  state.solved_types.push_back(k);
  return state.assignment;
}

SolveResult solve_ordered(const ProblemInstance& instance, std::span<const Index> order,
                          const HeuristicConfig& config) {
  if (!is_permutation_of_types(order, instance.num_rack_types)) {
    throw std::invalid_argument("order is not a permutation of the rack types");
  }
  Assignment start(instance.prior_assignment.entries(), AssignmentMode::kBinary);
  std::vector<Index> occupant = occupants_of(start);
  IncrementalObjective objective(instance, std::move(start), config.objective);
  TypeSolver solver(objective, occupant, config);

  SolveResult result;
  result.stats.reserve(order.size());
  for (Index k : order) result.stats.push_back(solver.solve(k, config.adjustment_rounds));

  result.assignment = objective.assignment();
  if (check_g2(instance, result.assignment) != Eigen::VectorXi::Zero(instance.num_rack_types) ||
      type_counts(result.assignment) != instance.demands) {
    throw std::logic_error("heuristic produced counts different from demands");
  }
  result.breakdown = total_utility(instance, result.assignment, config.objective);
  return result;
}

}  // namespace rackopt
