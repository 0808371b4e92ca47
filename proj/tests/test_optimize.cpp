#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dsense/analytic.hpp"
#include "dsense/optimize.hpp"
#include "dsense/simulate.hpp"
#include "test_support.hpp"

using namespace dsense;

namespace {

// Brute-force optimum over an explicit list of every policy.
double enumerated_optimum(const SystemModel& m) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t k = m.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    CodingPolicy p;
    for (std::size_t i = 0; i < k; ++i)
      p.rho.push_back(static_cast<std::uint8_t>((mask >> i) & 1u));
    best = std::min(best, hybrid_distortion(m, p).total);
  }
  return best;
}

SystemModel instance(std::uint64_t seed, std::size_t k) {
  return generate_instance(k, {5, 1.5}, {7, 1.5}, seed);
}

} // namespace

TEST_CASE("global search") {
  const auto r3 = global_search(SystemModel::homogeneous(3, 2, 2));
  CHECK(r3.evaluations == 8);

  const auto r2 = global_search(SystemModel::homogeneous(2, 1, 1));
  CHECK(r2.policy.to_string() == "11");
  CHECK(r2.distortion == doctest::Approx(0.625));

  for (double gob : {0.01, 1.0, 100.0})
    for (double gch : {0.01, 1.0, 100.0})
      CHECK(global_search(SystemModel::homogeneous(1, gob, gch)).policy.to_string() == "1");

  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const auto m = testing::random_model(rng, 1 + t % 8);
    CHECK(testing::rel_diff(global_search(m).distortion, enumerated_optimum(m)) <= 1e-12);
  }
  CHECK_THROWS_AS(global_search(SystemModel::homogeneous(kGlobalSearchMaxNodes + 1, 1, 1)),
                  ModelError);
}

TEST_CASE("global search tie rule prefers more coded nodes") {
  // Homogeneous systems tie across every permutation of a policy.
  const auto m = SystemModel::homogeneous(6, 7, 5);
  const auto r = global_search(m);
  CHECK(r.distortion == hybrid_distortion(m, r.policy).total);
  for (std::uint64_t mask = 0; mask < 64; ++mask) {
    CodingPolicy p;
    for (std::size_t i = 0; i < 6; ++i)
      p.rho.push_back(static_cast<std::uint8_t>((mask >> i) & 1u));
    const double d = hybrid_distortion(m, p).total;
    CHECK(d >= r.distortion);
    if (d == r.distortion && p.coded_count() == r.policy.coded_count())
      CHECK_FALSE(p.rho < r.policy.rho);
    if (d == r.distortion)
      CHECK(p.coded_count() <= r.policy.coded_count());
  }
}

TEST_CASE("pure greedy") {
  CHECK(pure_greedy(SystemModel::homogeneous(1, 0.3, 4)).policy.to_string() == "1");
  const auto r = pure_greedy(SystemModel::homogeneous(2, 1, 1));
  CHECK(r.policy.to_string() == "11");
  CHECK(r.distortion == doctest::Approx(0.625));
  CHECK(r.evaluations == 4 + 2);
  CHECK(r.visit_order == std::vector<std::size_t>{0, 1});

  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto m = instance(s, 1 + s % 9);
    const auto g = pure_greedy(m);
    CHECK(g.distortion >= global_search(m).distortion);
    auto order = g.visit_order;
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> all(m.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(order == all);
  }
}

TEST_CASE("group greedy") {
  CHECK_THROWS_AS(group_greedy(SystemModel::homogeneous(2, 1, 1), 0), ModelError);
  CHECK(exhaustive_group_size(8) == 1792);
  CHECK(exhaustive_group_size(1) == 2);

  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto m = instance(1000 + s, 1 + s % 10);
    const auto pure = pure_greedy(m);
    const auto one = group_greedy(m, 1);
    CHECK(one.policy == pure.policy);
    CHECK(one.distortion == pure.distortion);
    CHECK(one.visit_order == pure.visit_order);
    CHECK(one.evaluations == pure.evaluations);
  }
  for (std::uint64_t s = 0; s < 60; ++s) {
    const std::size_t k = 1 + s % 8;
    const auto m = instance(2000 + s, k);
    const auto full = group_greedy(m, exhaustive_group_size(k));
    const auto global = global_search(m);
    CHECK(full.policy == global.policy);
    CHECK(full.distortion == global.distortion);
  }
}

TEST_CASE("group greedy beam is sorted and duplicate free") {
  const auto m = instance(77, 7);
  GroupState st = initial_group_state(m, 16);
  std::uint64_t evals = 0;
  for (std::size_t step = 0; step < m.size(); ++step) {
    st = expand_group(m, st, evals);
    CHECK(st.policies.size() <= 16);
    for (std::size_t i = 1; i < st.policies.size(); ++i) {
      CHECK(st.policies[i - 1].distortion <= st.policies[i].distortion);
      for (std::size_t j = 0; j < i; ++j)
        CHECK(st.policies[i].assignment != st.policies[j].assignment);
    }
    for (const auto& p : st.policies)
      CHECK(p.visit_order.size() == step + 1);
  }
}

TEST_CASE("sorted greedy") {
  CHECK(sorted_greedy(SystemModel::homogeneous(1, 1, 1)).policy.to_string() == "1");
  CHECK(sorted_greedy(SystemModel::homogeneous(1, 1, 1)).distortion == doctest::Approx(1.0));
  const auto hom = SystemModel::homogeneous(7, 7, 5);
  const auto r = sorted_greedy(hom);
  CHECK(r.evaluations == 7 + 2 * 6);
  // Permutation invariance in distortion for homogeneous systems.
  CHECK(r.distortion == doctest::Approx(sorted_greedy(hom, SortKey::UncodedSingleNode).distortion));

  double sum_sorted = 0, sum_global = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto m = instance(3000 + s, 10);
    const auto g = sorted_greedy(m);
    const auto u = sorted_greedy(m, SortKey::UncodedSingleNode);
    const auto opt = global_search(m);
    CHECK(g.distortion >= opt.distortion);
    CHECK(u.distortion >= opt.distortion);
    CHECK(g.policy.rho[g.visit_order.front()] == 1);
    sum_sorted += g.distortion;
    sum_global += opt.distortion;
  }
  CHECK(sum_sorted / sum_global <= 1.002);
}

TEST_CASE("solve dispatch") {
  const auto m = instance(5, 6);
  CHECK(solve(m, Algorithm::Global).policy == global_search(m).policy);
  CHECK(solve(m, Algorithm::Group, 4).policy == group_greedy(m, 4).policy);
  CHECK(parse_algorithm("sorted") == Algorithm::Sorted);
  CHECK(algorithm_name(Algorithm::Pure) == "pure");
  CHECK_THROWS_AS(parse_algorithm("annealing"), ModelError);
}

TEST_CASE("normalized distortion") {
  std::vector<double> opt{1.0, 2.0, 3.0};
  CHECK(normalized_distortion(opt, opt) == 1.0);
  std::vector<double> worse{1.0, 2.5, 3.0};
  CHECK(normalized_distortion(worse, opt) == doctest::Approx(6.5 / 6.0));
  CHECK_THROWS_AS(normalized_distortion(std::vector<double>{}, std::vector<double>{}), ModelError);
  CHECK_THROWS_AS(normalized_distortion(worse, std::vector<double>{1.0}), ModelError);

  std::vector<PolicySearchResult> g, p;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = instance(4000 + s, 8);
    g.push_back(global_search(m));
    p.push_back(pure_greedy(m));
  }
  CHECK(normalized_distortion(g, g) == 1.0);
  CHECK(normalized_distortion(p, g) >= 1.0);
}

TEST_CASE("policy error rate") {
  std::vector<CodingPolicy> a{CodingPolicy::parse("101"), CodingPolicy::parse("000")};
  CHECK(policy_error_rate(a, a) == 0.0);
  std::vector<CodingPolicy> b{CodingPolicy::parse("100"), CodingPolicy::parse("100")};
  CHECK(policy_error_rate(b, a) == doctest::Approx(1.0 / 3.0));
  std::vector<CodingPolicy> c{CodingPolicy::parse("010"), CodingPolicy::parse("111")};
  CHECK(policy_error_rate(c, a) == 1.0);
  CHECK_THROWS_AS(policy_error_rate(std::vector<CodingPolicy>{}, std::vector<CodingPolicy>{}),
                  ModelError);
}
