#pragma once

// Monte Carlo counterparts of the closed forms in analytic.hpp.
//
// Every batch is split into fixed-size chunks; chunk c draws from its own
// generator derived from (seed, c). Chunk statistics are merged in chunk
// order, so results are bit-identical for any worker count.

#include <cstddef>
#include <cstdint>
#include <random>

#include "dsense/model.hpp"

namespace dsense {

using Rng = std::mt19937_64;

/// Independent generator for sub-stream `stream` of `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

struct TrialBatchStats {
  std::uint64_t n_trials = 0;
  double mean_sq_error = 0.0; ///< sample mean of the per-trial values
  double std_error = 0.0;     ///< sample standard deviation / sqrt(n_trials)
  double max_value = 0.0;     ///< largest single per-trial value
  std::uint64_t seed = 0;
};

/// Trials per RNG chunk; part of the reproducibility contract.
inline constexpr std::uint64_t kTrialsPerChunk = 1u << 16;

struct CodedSample {
  double observation; ///< theta + n_ob
  double recovery;    ///< x = observation - n_qu
};

/// One draw of the rate-distortion test channel for a coded node given the
/// source value. The recovery is a scaled observation plus independent
/// Gaussian noise, which yields E[(obs - x)^2] = sigma_qu^2 with x independent
/// of n_qu, and keeps nodes conditionally independent given theta.
CodedSample sample_coded_recovery(double theta, const SensorLink& link, double sigma_theta_sq,
                                  Rng& rng);

struct UncodedSample {
  double received; ///< sqrt(alpha) (theta + n_ob) + n_ch
  double estimate; ///< received / sqrt(alpha)
};

/// Amplify-and-forward transmission of one observation. Transmit power is
/// gamma_ch * channel_noise_power; the de-gained estimate's noise variance
/// does not depend on the channel noise scale.
UncodedSample sample_uncoded_observation(double theta, const SensorLink& link,
                                         double sigma_theta_sq, Rng& rng,
                                         double channel_noise_power = 1.0);

/// Squared error of BLUE fusion of simulated node outputs under `policy`.
/// The weights come from the analytic hybrid covariance. `workers` = 0 uses
/// the hardware concurrency.
TrialBatchStats empirical_distortion(const SystemModel& model, const CodingPolicy& policy,
                                     std::uint64_t n_trials, std::uint64_t seed,
                                     unsigned workers = 0);

enum class FadingGains {
  Shared,      ///< one power gain per block, common to every node
  Independent, ///< an independent gain per node and block
};

struct FadingBatchStats {
  TrialBatchStats stats;
  /// False when the sample mean is dominated by a few draws (largest block
  /// above 1% of the total, or standard error above 1% of the mean), which is
  /// what a divergent average looks like.
  bool converged = false;
};

/// Block-fading average of the instantaneous distortion: every block draws
/// exponential power gains of mean `nu`, scales each channel SNR and evaluates
/// the closed-form distortion of `scheme` (coded when true, else uncoded).
FadingBatchStats fading_empirical_distortion(const SystemModel& model, double nu,
                                             std::uint64_t n_blocks, std::uint64_t seed,
                                             FadingGains gains = FadingGains::Shared,
                                             bool coded = true, unsigned workers = 0);

struct FoldedNormalSpec {
  double target_mean = 1.0;
  double std_dev = 1.0;
};

/// Mean of |N(location, std_dev^2)|.
double folded_normal_mean(double location, double std_dev);

/// Location parameter whose folded normal has the spec's target mean. Throws
/// ModelError when the target is below the smallest reachable mean
/// std_dev * sqrt(2/pi).
double calibrate_folded_normal(const FoldedNormalSpec& spec);

/// Strictly positive draw from the calibrated folded normal.
double sample_folded_normal(double location, double std_dev, Rng& rng);

struct HeteroFadingStats {
  FadingBatchStats fading;  ///< coded distortion with faded channel SNRs
  TrialBatchStats nonfading; ///< coded distortion of the same instances without fading
};

/// Coded heterogeneous systems under block fading: every round draws a fresh
/// instance from the two folded-normal specs and one set of exponential power
/// gains of mean `nu`, and records the instantaneous coded distortion with and
/// without fading.
HeteroFadingStats hetero_fading_distortion(std::size_t k, const FoldedNormalSpec& ch_spec,
                                           const FoldedNormalSpec& ob_spec, double nu,
                                           std::uint64_t n_rounds, std::uint64_t seed,
                                           FadingGains gains = FadingGains::Independent,
                                           unsigned workers = 0, double sigma_theta_sq = 1.0);

/// Random heterogeneous model with K links whose channel and observation SNRs
/// follow the two folded-normal specs.
SystemModel generate_instance(std::size_t k, const FoldedNormalSpec& ch_spec,
                              const FoldedNormalSpec& ob_spec, std::uint64_t seed,
                              double sigma_theta_sq = 1.0);

} // namespace dsense
