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

#include "doctest.h"
#include "test_support.hpp"

#include "rackopt/heuristic.hpp"
#include "rackopt/instgen.hpp"
#include "rackopt/oracle.hpp"

#include <limits>

using namespace rackopt;
using rackopt::testing::binary_from;
using rackopt::testing::make_t1;

namespace {

// Every labeling of positions with a type or "vacant", filtered to exact
// demand counts.
double enumerate_all_labelings(const ProblemInstance& in) {
  const Index P = in.num_positions, K = in.num_rack_types;
  std::vector<Index> label(static_cast<std::size_t>(P), K);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    Assignment x = Assignment::empty(P, K);
    for (Index p = 0; p < P; ++p) {
      if (label[p] < K) x.place(p, label[p]);
    }
    if (type_counts(x) == in.demands) best = std::min(best, total_utility(in, x).augmented);
    Index p = 0;
    while (p < P && label[p] == 0) label[p++] = K;
    if (p == P) break;
    --label[p];
  }
  return best;
}

}  // namespace

TEST_CASE("T1: twelve candidates, optimum spreads the racks") {
  const ProblemInstance in = make_t1();
  CHECK(oracle_search_space(in) == 12.0);
  const OracleResult r = brute_force_solve(in);
  CHECK(r.search_space_size == 12);
  CHECK(r.optimal_breakdown.spread == 0.0);
  CHECK(r.optimal_value == total_utility(in, r.optimal_assignment).augmented);
  // First minimizer in enumeration order: type 0 at position 0, type 1 at 2.
  CHECK(r.optimal_assignment == binary_from(4, 2, {{0, 0}, {2, 1}}));
}

TEST_CASE("zero demands give the empty mapping") {
  ProblemInstance in = make_t1();
  in.demands << 0, 0;
  const OracleResult r = brute_force_solve(in);
  CHECK(r.search_space_size == 1);
  CHECK(r.optimal_assignment == Assignment::empty(4, 2));
}

TEST_CASE("search-space guard") {
  const ProblemInstance big = generate_instance(resized_config(200), 0);
  CHECK(oracle_search_space(big) > kOracleSearchLimit);
  try {
    brute_force_solve(big);
    FAIL("expected SearchSpaceTooLarge");
  } catch (const SearchSpaceTooLarge& e) {
    CHECK(e.size() == oracle_search_space(big));
  }
  CHECK_THROWS_AS(brute_force_solve(make_t1(), {}, 11.0), SearchSpaceTooLarge);
  ProblemInstance over = make_t1();
  over.demands << 3, 2;
  CHECK(oracle_search_space(over) == 0.0);
  CHECK_THROWS_AS(brute_force_solve(over), std::invalid_argument);
}

TEST_CASE("brute force agrees with enumerating every labeling") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const ProblemInstance in = generate_instance(tiny_config(), seed);
    CAPTURE(seed);
    CHECK(brute_force_solve(in).optimal_value == enumerate_all_labelings(in));
  }
}

TEST_CASE("optimality_gap") {
  const ProblemInstance in = make_t1();
  const OracleResult opt = brute_force_solve(in);
  CHECK(optimality_gap(in, opt.optimal_assignment, opt) == 0.0);
  const Assignment same_scope = binary_from(4, 2, {{0, 0}, {1, 1}});
  const double gap = optimality_gap(in, same_scope, opt);
  CHECK(gap > 0.0);
  CHECK(gap == (total_utility(in, same_scope).augmented - opt.optimal_value) /
                   std::max(1.0, std::abs(opt.optimal_value)));
  CHECK(optimality_gap(in, same_scope) == gap);
  CHECK_THROWS_AS(optimality_gap(in, binary_from(4, 2, {{0, 0}}), opt), std::invalid_argument);

  OracleResult wrong = opt;
  wrong.optimal_value = 1e6;
  CHECK_THROWS_AS(optimality_gap(in, same_scope, wrong), std::logic_error);
}

TEST_CASE("relabeling rack types leaves the optimum unchanged") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance in = generate_instance(tiny_config(), seed);
    ProblemInstance swapped = in;
    swapped.resource_matrix.row(0) = in.resource_matrix.row(1);
    swapped.resource_matrix.row(1) = in.resource_matrix.row(0);
    swapped.demands << in.demands[1], in.demands[0];
    swapped.movement_weights << in.movement_weights[1], in.movement_weights[0];
    Eigen::MatrixXd prior = in.prior_assignment.entries();
    prior.col(0).swap(prior.col(1));
    swapped.prior_assignment = Assignment(prior, AssignmentMode::kBinary);
    for (auto& req : swapped.spread_requirements) {
      for (Index& k : req.rack_group) k = 1 - k;
    }
    CHECK(brute_force_solve(swapped).optimal_value ==
          doctest::Approx(brute_force_solve(in).optimal_value).epsilon(1e-12));
  }
}

TEST_CASE("heuristic never beats the oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ProblemInstance in = generate_instance(tiny_config(), seed);
    const OracleResult opt = brute_force_solve(in);
    for (const std::vector<Index>& order : {std::vector<Index>{0, 1}, std::vector<Index>{1, 0}}) {
      const SolveResult r = solve_ordered(in, order);
      CHECK(optimality_gap(in, r.assignment, opt) >= 0.0);
    }
  }
}
