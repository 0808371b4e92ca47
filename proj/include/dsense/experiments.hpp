#pragma once

// Configuration-driven experiment runner. An experiment turns a flat
// key/value spec into a tidy table; writers emit it as CSV or JSON. Every row
// carries the seed and the parameters it was computed from, and rows only
// depend on their own grid point, so any row is reproducible on its own.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dsense/model.hpp"

namespace dsense {

enum class OutputFormat { Csv, Json };

OutputFormat parse_output_format(std::string_view name);

struct ExperimentSpec {
  std::string name;
  std::map<std::string, std::string> params; ///< overrides of the experiment defaults
  std::string output_path;                   ///< empty: default directory + name
  OutputFormat format = OutputFormat::Csv;
};

/// Parses `key = value` lines; `#` starts a comment. Reserved keys are
/// `experiment`, `output` and `format`; every other key is a parameter.
/// Unknown experiments, unknown parameters and duplicate keys are rejected.
ExperimentSpec parse_spec(std::string_view text);
ExperimentSpec load_spec_file(const std::string& path);

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::map<std::string, std::string> defaults;
};

const std::vector<ExperimentInfo>& experiment_registry();

/// Throws ModelError unless `spec` names a registered experiment and only
/// overrides parameters that experiment declares.
void check_spec(const ExperimentSpec& spec);

/// Defaults merged with the spec's overrides.
std::map<std::string, std::string> effective_params(const ExperimentSpec& spec);

using Cell = std::variant<std::int64_t, double, std::string>;

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

/// Runs the experiment; check_spec() runs first, so nothing is computed for an
/// invalid spec.
ResultTable run_experiment(const ExperimentSpec& spec);

/// CSV: header row, LF line endings, doubles with 17 significant digits.
void write_csv(const ResultTable& table, std::ostream& out);
/// One object with `spec`, `seed` and a `rows` array of column-keyed objects.
void write_json(const ExperimentSpec& spec, const ResultTable& table, std::ostream& out);
/// Same document for a command that is not a registered experiment.
void write_json(std::string_view name, const std::map<std::string, std::string>& params,
                std::uint64_t seed, const ResultTable& table, std::ostream& out);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "DSENSE_OUTPUT_DIR";

/// spec.output_path if set, else $DSENSE_OUTPUT_DIR (or ".") / name.csv|json.
std::string resolve_output_path(const ExperimentSpec& spec);

/// Writes the table to resolve_output_path(spec) and returns that path.
/// Throws ModelError when the file cannot be written.
std::string write_result(const ExperimentSpec& spec, const ResultTable& table);

/// Deterministic 64-bit seed for a sub-task identified by up to three indices.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Folded-normal instance generator used by the policy experiments: channel
/// SNR mean/std and observation SNR mean/std.
struct InstanceDistribution {
  double gamma_ch_mean = 5.0;
  double gamma_ch_std = 1.5;
  double gamma_ob_mean = 7.0;
  double gamma_ob_std = 1.5;
};

/// Instance n of the batch for node count k.
SystemModel policy_instance(const InstanceDistribution& dist, std::size_t k, std::uint64_t seed,
                            std::uint64_t n);

/// Per-algorithm outcome of a batch of instances.
struct AlgorithmScore {
  std::string algorithm;  ///< "global", "pure", "sorted", "group", "coded", "uncoded"
  std::size_t group_size; ///< L for group greedy, 0 otherwise
  double normalized_distortion;
  double policy_error_rate;
};

/// Runs global search, pure, sorted and group greedy (every L in
/// `group_sizes`) together with the all-coded and all-uncoded policies on
/// `n_sim` instances with k nodes.
std::vector<AlgorithmScore> compare_algorithms(const InstanceDistribution& dist, std::size_t k,
                                               std::span<const std::size_t> group_sizes,
                                               std::uint64_t n_sim, std::uint64_t seed,
                                               unsigned workers = 0);

/// Random-error study at k nodes. Per L: the group greedy error rate eps(L)
/// and normalized distortion, then random policies flipping each optimal flag
/// with probability eps, eps/2 and eps/3. Columns: k, l, family,
/// flip_probability, normalized_distortion, policy_error_rate, n_sim, seed.
ResultTable run_random_error_study(const InstanceDistribution& dist, std::size_t k,
                                   std::span<const std::size_t> group_sizes, std::uint64_t n_sim,
                                   std::uint64_t seed, unsigned workers = 0);

} // namespace dsense
