#include "dsense/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "dsense/analytic.hpp"

namespace dsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CodingPolicy to_policy(std::span<const std::int8_t> assignment) {
  CodingPolicy p;
  p.rho.reserve(assignment.size());
  for (auto a : assignment)
    p.rho.push_back(a == 1 ? 1 : 0);
  return p;
}

// Stamps the final distortion from a full re-evaluation.
PolicySearchResult finish(const SystemModel& model, CodingPolicy policy,
                          std::vector<std::size_t> order, std::uint64_t evaluations) {
  PolicySearchResult r;
  r.distortion = hybrid_distortion(model, policy).total;
  r.policy = std::move(policy);
  r.visit_order = std::move(order);
  r.evaluations = evaluations;
  return r;
}

// Global-search preference among equal distortions.
bool preferred_on_tie(const CodingPolicy& a, const CodingPolicy& b) {
  const auto ca = a.coded_count(), cb = b.coded_count();
  if (ca != cb)
    return ca > cb;
  return a.rho < b.rho;
}

std::string key_of(const std::vector<std::int8_t>& assignment) {
  return {assignment.begin(), assignment.end()};
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

} // namespace

PolicySearchResult global_search(const SystemModel& model) {
  validate(model);
  const std::size_t k = model.size();
  if (k > kGlobalSearchMaxNodes)
    throw ModelError("global search supports K <= " + std::to_string(kGlobalSearchMaxNodes) +
                     ", got K = " + std::to_string(k));
  std::vector<std::int8_t> assignment(k);
  CodingPolicy best;
  double best_d = kInf;
  std::uint64_t evaluations = 0;
  const std::uint64_t count = std::uint64_t{1} << k;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < k; ++i)
      assignment[i] = static_cast<std::int8_t>((mask >> i) & 1u);
    const double d = subsystem_distortion(model, assignment);
    ++evaluations;
    if (d < best_d) {
      best_d = d;
      best = to_policy(assignment);
    } else if (d == best_d) {
      auto candidate = to_policy(assignment);
      if (preferred_on_tie(candidate, best))
        best = std::move(candidate);
    }
  }
  return finish(model, std::move(best), {}, evaluations);
}

PolicySearchResult pure_greedy(const SystemModel& model) {
  validate(model);
  const std::size_t k = model.size();
  std::vector<std::int8_t> assignment(k, kNodeExcluded);
  std::vector<std::size_t> order;
  std::uint64_t evaluations = 0;
  for (std::size_t step = 0; step < k; ++step) {
    double best_d = kInf;
    std::size_t best_node = k;
    std::int8_t best_scheme = 1;
    for (std::size_t node = 0; node < k; ++node) {
      if (assignment[node] != kNodeExcluded)
        continue;
      for (std::int8_t scheme : {1, 0}) {
        assignment[node] = scheme;
        const double d = subsystem_distortion(model, assignment);
        ++evaluations;
        if (d < best_d) {
          best_d = d;
          best_node = node;
          best_scheme = scheme;
        }
      }
      assignment[node] = kNodeExcluded;
    }
    assignment[best_node] = best_scheme;
    order.push_back(best_node);
  }
  return finish(model, to_policy(assignment), std::move(order), evaluations);
}

GroupState initial_group_state(const SystemModel& model, std::size_t group_size) {
  if (group_size < 1)
    throw ModelError("group size must be >= 1");
  GroupState s;
  s.group_size = group_size;
  s.policies.push_back({std::vector<std::int8_t>(model.size(), kNodeExcluded), {}, kInf});
  return s;
}

GroupState expand_group(const SystemModel& model, const GroupState& state,
                        std::uint64_t& evaluations) {
  std::vector<PartialPolicy> candidates;
  for (const auto& parent : state.policies) {
    for (std::size_t node = 0; node < model.size(); ++node) {
      if (parent.assignment[node] != kNodeExcluded)
        continue;
      for (std::int8_t scheme : {1, 0}) {
        PartialPolicy child = parent;
        child.assignment[node] = scheme;
        child.visit_order.push_back(node);
        child.distortion = subsystem_distortion(model, child.assignment);
        ++evaluations;
        candidates.push_back(std::move(child));
      }
    }
  }
  // Stable: equal distortions keep generation order, i.e. parent rank, then
  // node index, then coded first.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const PartialPolicy& a, const PartialPolicy& b) {
                     return a.distortion < b.distortion;
                   });
  GroupState next;
  next.group_size = state.group_size;
  std::unordered_set<std::string> seen;
  for (auto& c : candidates) {
    if (next.policies.size() == state.group_size)
      break;
    if (seen.insert(key_of(c.assignment)).second)
      next.policies.push_back(std::move(c));
  }
  return next;
}

PolicySearchResult group_greedy(const SystemModel& model, std::size_t group_size) {
  validate(model);
  GroupState state = initial_group_state(model, group_size);
  std::uint64_t evaluations = 0;
  for (std::size_t step = 0; step < model.size(); ++step)
    state = expand_group(model, state, evaluations);

  // The beam is sorted; among exact ties apply the global-search preference.
  const PartialPolicy* best = &state.policies.front();
  CodingPolicy best_policy = to_policy(best->assignment);
  for (const auto& p : state.policies) {
    if (p.distortion != best->distortion)
      break;
    auto candidate = to_policy(p.assignment);
    if (preferred_on_tie(candidate, best_policy)) {
      best = &p;
      best_policy = std::move(candidate);
    }
  }
  return finish(model, std::move(best_policy), best->visit_order, evaluations);
}

std::size_t exhaustive_group_size(std::size_t k) {
  std::uint64_t best = 1;
  for (std::size_t j = 0; j <= k; ++j)
    best = std::max(best, binomial(k, j) << j);
  return static_cast<std::size_t>(best);
}

PolicySearchResult sorted_greedy(const SystemModel& model, SortKey key) {
  validate(model);
  const std::size_t k = model.size();
  std::vector<std::int8_t> assignment(k, kNodeExcluded);
  std::uint64_t evaluations = 0;

  const std::int8_t probe = key == SortKey::CodedSingleNode ? 1 : 0;
  std::vector<double> single(k);
  for (std::size_t node = 0; node < k; ++node) {
    assignment[node] = probe;
    single[node] = subsystem_distortion(model, assignment);
    ++evaluations;
    assignment[node] = kNodeExcluded;
  }
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i)
    order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return single[a] > single[b]; });

  assignment[order.front()] = 1;
  for (std::size_t step = 1; step < k; ++step) {
    const std::size_t node = order[step];
    assignment[node] = 1;
    const double coded = subsystem_distortion(model, assignment);
    assignment[node] = 0;
    const double uncoded = subsystem_distortion(model, assignment);
    evaluations += 2;
    assignment[node] = uncoded < coded ? 0 : 1;
  }
  return finish(model, to_policy(assignment), std::move(order), evaluations);
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "global")
    return Algorithm::Global;
  if (name == "pure")
    return Algorithm::Pure;
  if (name == "group")
    return Algorithm::Group;
  if (name == "sorted")
    return Algorithm::Sorted;
  throw ModelError("unknown algorithm '" + std::string(name) +
                   "' (expected global, pure, group or sorted)");
}

std::string_view algorithm_name(Algorithm algo) {
  switch (algo) {
  case Algorithm::Global:
    return "global";
  case Algorithm::Pure:
    return "pure";
  case Algorithm::Group:
    return "group";
  case Algorithm::Sorted:
    return "sorted";
  }
  return "unknown";
}

PolicySearchResult solve(const SystemModel& model, Algorithm algo, std::size_t group_size) {
  switch (algo) {
  case Algorithm::Global:
    return global_search(model);
  case Algorithm::Pure:
    return pure_greedy(model);
  case Algorithm::Group:
    return group_greedy(model, group_size);
  case Algorithm::Sorted:
    return sorted_greedy(model);
  }
  throw ModelError("unknown algorithm");
}

double normalized_distortion(std::span<const double> algorithm, std::span<const double> optimal) {
  if (algorithm.empty())
    throw ModelError("normalized distortion of an empty batch");
  if (algorithm.size() != optimal.size())
    throw ModelError("normalized distortion needs equal batch lengths");
  double a = 0.0, o = 0.0;
  for (std::size_t i = 0; i < algorithm.size(); ++i) {
    a += algorithm[i];
    o += optimal[i];
  }
  return a / o;
}

double normalized_distortion(std::span<const PolicySearchResult> algorithm,
                             std::span<const PolicySearchResult> optimal) {
  std::vector<double> a, o;
  a.reserve(algorithm.size());
  o.reserve(optimal.size());
  for (const auto& r : algorithm)
    a.push_back(r.distortion);
  for (const auto& r : optimal)
    o.push_back(r.distortion);
  return normalized_distortion(std::span<const double>(a), std::span<const double>(o));
}

double policy_error_rate(std::span<const CodingPolicy> policies,
                         std::span<const CodingPolicy> optimal) {
  if (policies.empty())
    throw ModelError("policy error rate of an empty batch");
  if (policies.size() != optimal.size())
    throw ModelError("policy error rate needs equal batch lengths");
  std::uint64_t errors = 0, total = 0;
  for (std::size_t n = 0; n < policies.size(); ++n) {
    if (policies[n].size() != optimal[n].size())
      throw ModelError("policy error rate needs equal policy lengths");
    for (std::size_t k = 0; k < policies[n].size(); ++k)
      errors += (policies[n].rho[k] ^ optimal[n].rho[k]) & 1u;
    total += policies[n].size();
  }
  return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total);
}

} // namespace dsense
