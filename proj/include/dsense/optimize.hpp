#pragma once

// Hybrid coding policy search.
//
// All searches share one argmin rule: among equal distortions the lower node
// index wins, then coded before uncoded. Sub-system distortions come from
// subsystem_distortion(), so the same partial policy always evaluates to the
// same bits, and the returned distortion equals hybrid_distortion() of the
// returned policy exactly.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dsense/model.hpp"

namespace dsense {

/// Largest K accepted by global_search (2^K evaluations).
inline constexpr std::size_t kGlobalSearchMaxNodes = 24;

/// Evaluates all 2^K policies. Ties go to the policy with more coded nodes,
/// then to the lexicographically smallest flag string.
PolicySearchResult global_search(const SystemModel& model);

/// Adds one (node, scheme) pair per iteration, the pair that minimizes the
/// distortion of the grown sub-system.
PolicySearchResult pure_greedy(const SystemModel& model);

/// A partial policy: assignment per node (kNodeExcluded for nodes not yet
/// added) with the order in which nodes were added.
struct PartialPolicy {
  std::vector<std::int8_t> assignment;
  std::vector<std::size_t> visit_order;
  double distortion = 0.0;
};

/// Beam of partial policies kept by the group greedy search. All members have
/// the same number of assigned nodes and are sorted by ascending distortion.
struct GroupState {
  std::vector<PartialPolicy> policies;
  std::size_t group_size = 1;
};

GroupState initial_group_state(const SystemModel& model, std::size_t group_size);

/// One group greedy iteration: expands every member by every remaining
/// (node, scheme) pair, drops duplicate partial policies and keeps the
/// `group_size` smallest. `evaluations` is incremented per distortion call.
GroupState expand_group(const SystemModel& model, const GroupState& state,
                        std::uint64_t& evaluations);

/// Group greedy with `group_size` (L) >= 1 retained partial policies.
PolicySearchResult group_greedy(const SystemModel& model, std::size_t group_size);

/// Group size at which group greedy keeps every partial policy and therefore
/// returns the global optimum: max_k C(K, k) 2^k.
std::size_t exhaustive_group_size(std::size_t k);

/// Node-ordering rule for sorted greedy.
enum class SortKey {
  CodedSingleNode,   ///< single-node coded distortion (default)
  UncodedSingleNode, ///< single-node uncoded distortion
};

/// Visits nodes by descending single-node distortion; the first node is coded
/// and each later node takes the scheme giving the smaller running distortion.
PolicySearchResult sorted_greedy(const SystemModel& model,
                                 SortKey key = SortKey::CodedSingleNode);

enum class Algorithm { Global, Pure, Group, Sorted };

Algorithm parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm algo);

/// Dispatches to the search routine; `group_size` only applies to Group.
PolicySearchResult solve(const SystemModel& model, Algorithm algo, std::size_t group_size = 1);

/// Ratio of mean distortions, algorithm over exhaustive search.
double normalized_distortion(std::span<const double> algorithm, std::span<const double> optimal);
double normalized_distortion(std::span<const PolicySearchResult> algorithm,
                             std::span<const PolicySearchResult> optimal);

/// Fraction of policy flags that differ from the optimal policies.
double policy_error_rate(std::span<const CodingPolicy> policies,
                         std::span<const CodingPolicy> optimal);

} // namespace dsense
