#pragma once

// Closed-form estimation distortion of coded, uncoded and hybrid distributed
// sensing systems with orthogonal channels and a BLUE fusion center.
//
// Every distortion is in the units of sigma_theta^2. Node counts that only
// enter homogeneous formulas are taken as double so the same expressions can
// be scanned in continuous K when locating crossovers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dsense/model.hpp"

namespace dsense {

// ---------------------------------------------------------------------------
// Covariance structure of coded nodes and the generic BLUE
// ---------------------------------------------------------------------------

struct CrossMoments {
  double qu_ob;    ///< E[n_qu n_ob]
  double qu_theta; ///< E[n_qu theta]
};

/// Second-order moments of the test-channel quantization noise with the
/// observation noise and the source.
CrossMoments quantization_cross_moments(double sigma_theta_sq, double sigma_ob_sq,
                                        double sigma_qu_sq);

/// Covariance of the effective estimation noise seen by the fusion center.
struct NoiseCovariance {
  Eigen::MatrixXd entries;
};

/// Covariance of n = n_qu - n_ob when every node uses the coded scheme.
NoiseCovariance total_noise_covariance(const SystemModel& model);

/// Covariance of the estimation noise under a hybrid policy. Coded nodes form
/// a dense block given by total_noise_covariance; uncoded nodes contribute
/// independent diagonal entries sigma_ob^2 + sigma_ch^2 / alpha.
NoiseCovariance hybrid_noise_covariance(const SystemModel& model, const CodingPolicy& policy);

/// (1' S^-1 1)^-1 via a Cholesky solve. Throws ModelError when the matrix is
/// not symmetric positive definite.
double blue_distortion(const NoiseCovariance& cov);

/// Optimal unbiased weights S^-1 1 / (1' S^-1 1), renormalized to sum to one.
Eigen::VectorXd blue_weights(const NoiseCovariance& cov);

// ---------------------------------------------------------------------------
// Heterogeneous systems
// ---------------------------------------------------------------------------

/// Closed-form coded distortion for arbitrary per-node SNRs. The rank-one
/// structure of the covariance is solved analytically, so this is O(K).
double coded_hetero_distortion(const SystemModel& model);

/// Uncoded (amplify-and-forward) distortion for arbitrary per-node SNRs.
double uncoded_hetero_distortion(const SystemModel& model);

/// Inverse-distortion contribution of one uncoded node, in units of
/// 1/sigma_theta^2: 1 / (1/g_ob + 1/g_ch + 1/(g_ob g_ch)).
double uncoded_node_term(const SensorLink& link);

/// Inverts the coded covariance both through the rank-one (Sherman-Morrison)
/// identity and through a generic LU factorization and returns the largest
/// elementwise relative deviation between the two inverses. K <= 64.
double sherman_morrison_check(const SystemModel& model);

struct DistortionBreakdown {
  double total = 0.0;
  /// Coded-set contribution to sigma_theta^2 / D (zero if no node is coded).
  double coded_term = 0.0;
  /// Per uncoded node, ascending node index.
  std::vector<double> uncoded_terms;
};

/// Distortion with an arbitrary coded/uncoded split of the nodes.
DistortionBreakdown hybrid_distortion(const SystemModel& model, const CodingPolicy& policy);

/// Marks a node as excluded from a sub-system in subsystem_distortion().
inline constexpr std::int8_t kNodeExcluded = -1;

/// Hybrid distortion of the sub-system formed by the nodes whose assignment is
/// 0 or 1 (others kNodeExcluded). Summation always runs in node-index order so
/// the same node set and policy give bit-identical results however it was
/// assembled. Returns +inf for an empty sub-system.
double subsystem_distortion(const SystemModel& model, std::span<const std::int8_t> assignment);

// ---------------------------------------------------------------------------
// Homogeneous systems
// ---------------------------------------------------------------------------

double coded_homo_distortion(double k, double gamma_ob, double gamma_ch,
                             double sigma_theta_sq = 1.0);

double uncoded_homo_distortion(double k, double gamma_ob, double gamma_ch,
                               double sigma_theta_sq = 1.0);

/// D_coded - D_uncoded in the factored form whose sign is read off directly.
double homo_distortion_gap(double k, double gamma_ob, double gamma_ch,
                           double sigma_theta_sq = 1.0);

/// Coded distortion when K -> infinity: sigma_theta^2 / (1 + gamma_ch)^2.
double coded_homo_asymptote(double gamma_ch, double sigma_theta_sq = 1.0);

enum class Scheme { Coded, Uncoded };

enum class SnrLimit { Zero, Finite, Infinite };

struct LimitRegime {
  SnrLimit gamma_ob = SnrLimit::Finite;
  SnrLimit gamma_ch = SnrLimit::Finite;
};

/// Parses labels such as "ob=inf,ch=finite" or "ob->0 ch->inf".
LimitRegime parse_limit_regime(std::string_view label);
Scheme parse_scheme(std::string_view name);

/// Homogeneous distortion in the limit regime; the finite partner SNR and K
/// enter the closed form. Returns +inf for divergent entries. Where both SNRs
/// tend to zero the channel limit is taken first.
double limiting_distortion(Scheme scheme, LimitRegime regime, double k, double gamma_ob,
                           double gamma_ch, double sigma_theta_sq = 1.0);

/// True iff D_coded < D_uncoded in a homogeneous system (ties go to uncoded).
bool coded_wins_homo(std::size_t k, double gamma_ob, double gamma_ch);

struct CodedRegion {
  double gamma_ob_star; ///< below this, coded wins for every channel SNR
  /// Channel SNRs bounding the uncoded-optimal interval (gamma_ch1, gamma_ch2);
  /// nullopt when the discriminant is negative.
  std::optional<std::pair<double, double>> gamma_ch_roots;
};

/// Boundary of the coded-optimal region for K >= 3 at a given observation SNR.
CodedRegion coded_region(std::size_t k, double gamma_ob);

/// Largest (continuous) K for which coded still wins at the given SNR pair;
/// this is the root of D_coded(K) = D_uncoded(K).
double max_coded_nodes(double gamma_ob, double gamma_ch);

// ---------------------------------------------------------------------------
// Total power constraint
// ---------------------------------------------------------------------------

struct TotalPowerDistortions {
  double coded;
  double uncoded;
};

TotalPowerDistortions total_power_distortions(double k, double gamma_ob, double gamma_total,
                                              double sigma_theta_sq = 1.0);

/// K -> infinity limits of total_power_distortions().
TotalPowerDistortions total_power_limits(double gamma_ob, double gamma_total,
                                         double sigma_theta_sq = 1.0);

bool coded_wins_total(std::size_t k, double gamma_ob, double gamma_total);

/// Continuous K at which the total-power coded and uncoded distortions are
/// equal; nullopt when coded wins for every K.
std::optional<double> total_power_crossover(double gamma_ob, double gamma_total);

// ---------------------------------------------------------------------------
// Heterogeneous coded-vs-uncoded condition
// ---------------------------------------------------------------------------

struct HeteroCondition {
  bool coded_wins;            ///< primary form
  bool coded_wins_equivalent; ///< the rearranged "+1 > (... - 1)^2" form
  double lhs;                 ///< primary form, left side
  double rhs;                 ///< primary form, right side
};

HeteroCondition coded_wins_hetero(const SystemModel& model);

// ---------------------------------------------------------------------------
// Fading and amplify-and-forward helpers
// ---------------------------------------------------------------------------

/// Coded homogeneous distortion averaged over Rayleigh block fading with one
/// exponential power gain of mean nu per block shared by all nodes.
double fading_coded_homo_distortion(double k, double gamma_ob, double gamma_ch, double nu,
                                    double sigma_theta_sq = 1.0);

/// Amplify-and-forward power gain P / (sigma_theta^2 + sigma_ob^2).
double amplifier_gain(double power, double sigma_theta_sq, double sigma_ob_sq);

/// Diagnostic for the "capable node" notion: both SNRs above user thresholds.
bool is_capable_node(const SensorLink& link, double gamma_ob_threshold,
                     double gamma_ch_threshold);

} // namespace dsense
