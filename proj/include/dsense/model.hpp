#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsense {

/// Raised when a model, policy or argument violates a domain invariant.
class ModelError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// One sensor node together with its orthogonal channel to the fusion center.
/// SNRs are linear (not dB). Unit channel gain is assumed, so the channel SNR
/// is transmit power over channel noise power.
struct SensorLink {
  double gamma_ob = 1.0; ///< observation SNR, sigma_theta^2 / sigma_ob^2
  double gamma_ch = 1.0; ///< channel SNR, P / sigma_ch^2
};

struct SystemModel {
  double sigma_theta_sq = 1.0;
  std::vector<SensorLink> links;
  double bandwidth = 1.0; ///< Hz; only used by coding_rates()

  std::size_t size() const noexcept { return links.size(); }

  /// K identical links.
  static SystemModel homogeneous(std::size_t k, double gamma_ob, double gamma_ch,
                                 double sigma_theta_sq = 1.0);
};

/// Per-node scheme assignment: 1 = coded (separate source-channel coding),
/// 0 = uncoded (amplify-and-forward).
struct CodingPolicy {
  std::vector<std::uint8_t> rho;

  std::size_t size() const noexcept { return rho.size(); }
  std::size_t coded_count() const noexcept;
  bool operator==(const CodingPolicy&) const = default;

  static CodingPolicy all_coded(std::size_t k) { return {std::vector<std::uint8_t>(k, 1)}; }
  static CodingPolicy all_uncoded(std::size_t k) { return {std::vector<std::uint8_t>(k, 0)}; }
  /// Parses a bit string such as "1011"; separators ',' and ' ' are ignored.
  static CodingPolicy parse(std::string_view bits);
  std::string to_string() const;
};

struct PolicySearchResult {
  CodingPolicy policy;
  double distortion = 0.0;
  std::vector<std::size_t> visit_order; ///< empty for exhaustive search
  std::uint64_t evaluations = 0;        ///< distortion-formula evaluations
};

/// Returns the model unchanged if every invariant holds, otherwise throws
/// ModelError with a diagnostic naming the violated invariant.
const SystemModel& validate(const SystemModel& model);

/// Throws ModelError unless `policy` has one flag per node and every flag is 0 or 1.
void check_policy(const SystemModel& model, const CodingPolicy& policy);

struct NoisePowers {
  double sigma_ob_sq;
  double sigma_qu_sq;
};

/// Observation noise power and the quantization distortion reached when the
/// source code rate equals the channel capacity.
NoisePowers derived_noise_powers(const SystemModel& model, std::size_t k);

struct CodingRates {
  double channel;        ///< bits/s, W log2(1 + gamma_ch)
  double source_coding;  ///< bits/s, W log2((sigma_theta^2 + sigma_ob^2) / sigma_qu^2)
};

CodingRates coding_rates(const SystemModel& model, std::size_t k);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace dsense
