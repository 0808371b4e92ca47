#include "dsense/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "dsense/analytic.hpp"

namespace dsense {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Chan et al. pairwise merge of running moments.
struct Moments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double max = 0.0;

  void add(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
    max = std::max(max, v);
  }

  void merge(const Moments& o) {
    if (o.n == 0)
      return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(n + o.n);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.n) / total;
    m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) / total;
    n += o.n;
    max = std::max(max, o.max);
  }

  TrialBatchStats stats(std::uint64_t seed) const {
    TrialBatchStats s;
    s.n_trials = n;
    s.mean_sq_error = mean;
    s.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    s.max_value = max;
    s.seed = seed;
    return s;
  }
};

// Runs `chunk_fn(trials_in_chunk, rng) -> Acc` over all chunks and merges
// in chunk order. Acc provides merge().
template <typename Acc, typename ChunkFn>
Acc run_chunks(std::uint64_t n_trials, std::uint64_t seed, unsigned workers, ChunkFn chunk_fn) {
  const std::uint64_t n_chunks = (n_trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<Acc> per_chunk(n_chunks);
  auto work = [&](unsigned w, unsigned stride) {
    for (std::uint64_t c = w; c < n_chunks; c += stride) {
      const std::uint64_t first = c * kTrialsPerChunk;
      const std::uint64_t count = std::min(kTrialsPerChunk, n_trials - first);
      Rng rng = make_stream(seed, c);
      per_chunk[c] = chunk_fn(count, rng);
    }
  };
  if (workers == 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(n_chunks, 1)));
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back(work, w, workers);
  }
  Acc total;
  for (const auto& m : per_chunk)
    total.merge(m);
  return total;
}

struct MomentPair {
  Moments first, second;
  void merge(const MomentPair& o) {
    first.merge(o.first);
    second.merge(o.second);
  }
};

bool looks_converged(const TrialBatchStats& s) {
  const double total = s.mean_sq_error * static_cast<double>(s.n_trials);
  return s.max_value <= 0.01 * total && s.std_error <= 0.01 * s.mean_sq_error;
}

// Exponential power gain with mean nu by inverse CDF; u in (0, 1).
double sample_exponential(double nu, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u;
  do {
    u = uniform(rng);
  } while (u == 0.0);
  return -nu * std::log(u);
}

} // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  const std::uint64_t a = splitmix64(state);
  const std::uint64_t b = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace {

template <typename Normal>
CodedSample coded_draw(double theta, const SensorLink& link, double sigma_theta_sq,
                       Normal&& normal) {
  const double ob = sigma_theta_sq / link.gamma_ob;
  const double obs_power = sigma_theta_sq + ob;
  const double qu = obs_power / (1.0 + link.gamma_ch);
  const double shrink = 1.0 - qu / obs_power; // = gamma_ch / (1 + gamma_ch)
  const double observation = theta + std::sqrt(ob) * normal();
  const double w = std::sqrt(qu * shrink) * normal();
  return {observation, shrink * observation + w};
}

template <typename Normal>
UncodedSample uncoded_draw(double theta, const SensorLink& link, double sigma_theta_sq,
                           double channel_noise_power, Normal&& normal) {
  const double ob = sigma_theta_sq / link.gamma_ob;
  const double alpha = amplifier_gain(link.gamma_ch * channel_noise_power, sigma_theta_sq, ob);
  const double n_ob = std::sqrt(ob) * normal();
  const double n_ch = std::sqrt(channel_noise_power) * normal();
  const double gain = std::sqrt(alpha);
  const double y = gain * (theta + n_ob) + n_ch;
  return {y, y / gain};
}

} // namespace

CodedSample sample_coded_recovery(double theta, const SensorLink& link, double sigma_theta_sq,
                                  Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return coded_draw(theta, link, sigma_theta_sq, [&] { return normal(rng); });
}

UncodedSample sample_uncoded_observation(double theta, const SensorLink& link,
                                         double sigma_theta_sq, Rng& rng,
                                         double channel_noise_power) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return uncoded_draw(theta, link, sigma_theta_sq, channel_noise_power,
                      [&] { return normal(rng); });
}

TrialBatchStats empirical_distortion(const SystemModel& model, const CodingPolicy& policy,
                                     std::uint64_t n_trials, std::uint64_t seed,
                                     unsigned workers) {
  check_policy(validate(model), policy);
  if (n_trials == 0)
    throw ModelError("n_trials must be >= 1");
  const Eigen::VectorXd f = blue_weights(hybrid_noise_covariance(model, policy));
  const double theta_sd = std::sqrt(model.sigma_theta_sq);
  const std::size_t k = model.size();

  auto chunk = [&](std::uint64_t count, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&] { return normal(rng); };
    Moments m;
    for (std::uint64_t t = 0; t < count; ++t) {
      const double theta = theta_sd * draw();
      double estimate = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const auto& link = model.links[i];
        const double xi =
            policy.rho[i] ? coded_draw(theta, link, model.sigma_theta_sq, draw).recovery
                          : uncoded_draw(theta, link, model.sigma_theta_sq, 1.0, draw).estimate;
        estimate += f(static_cast<Eigen::Index>(i)) * xi;
      }
      const double err = estimate - theta;
      m.add(err * err);
    }
    return m;
  };
  return run_chunks<Moments>(n_trials, seed, workers, chunk).stats(seed);
}

FadingBatchStats fading_empirical_distortion(const SystemModel& model, double nu,
                                             std::uint64_t n_blocks, std::uint64_t seed,
                                             FadingGains gains, bool coded, unsigned workers) {
  validate(model);
  if (!(nu > 0.0) || !std::isfinite(nu))
    throw ModelError("average fading gain must be finite and > 0");
  if (n_blocks == 0)
    throw ModelError("n_blocks must be >= 1");

  auto chunk = [&](std::uint64_t count, Rng& rng) {
    SystemModel faded = model;
    Moments m;
    for (std::uint64_t b = 0; b < count; ++b) {
      const double shared = gains == FadingGains::Shared ? sample_exponential(nu, rng) : 0.0;
      for (std::size_t i = 0; i < model.size(); ++i) {
        const double h = gains == FadingGains::Shared ? shared : sample_exponential(nu, rng);
        faded.links[i].gamma_ch = h * model.links[i].gamma_ch;
      }
      m.add(coded ? coded_hetero_distortion(faded) : uncoded_hetero_distortion(faded));
    }
    return m;
  };
  FadingBatchStats out;
  out.stats = run_chunks<Moments>(n_blocks, seed, workers, chunk).stats(seed);
  out.converged = looks_converged(out.stats);
  return out;
}

HeteroFadingStats hetero_fading_distortion(std::size_t k, const FoldedNormalSpec& ch_spec,
                                           const FoldedNormalSpec& ob_spec, double nu,
                                           std::uint64_t n_rounds, std::uint64_t seed,
                                           FadingGains gains, unsigned workers,
                                           double sigma_theta_sq) {
  if (k == 0)
    throw ModelError("no nodes");
  if (!(nu > 0.0) || !std::isfinite(nu))
    throw ModelError("average fading gain must be finite and > 0");
  if (n_rounds == 0)
    throw ModelError("n_rounds must be >= 1");
  const double mu_ch = calibrate_folded_normal(ch_spec);
  const double mu_ob = calibrate_folded_normal(ob_spec);

  auto chunk = [&](std::uint64_t count, Rng& rng) {
    SystemModel m;
    m.sigma_theta_sq = sigma_theta_sq;
    m.links.resize(k);
    MomentPair acc;
    for (std::uint64_t r = 0; r < count; ++r) {
      for (auto& link : m.links) {
        link.gamma_ch = sample_folded_normal(mu_ch, ch_spec.std_dev, rng);
        link.gamma_ob = sample_folded_normal(mu_ob, ob_spec.std_dev, rng);
      }
      acc.second.add(coded_hetero_distortion(m));
      const double shared = gains == FadingGains::Shared ? sample_exponential(nu, rng) : 0.0;
      for (auto& link : m.links)
        link.gamma_ch *= gains == FadingGains::Shared ? shared : sample_exponential(nu, rng);
      acc.first.add(coded_hetero_distortion(m));
    }
    return acc;
  };
  const auto acc = run_chunks<MomentPair>(n_rounds, seed, workers, chunk);
  HeteroFadingStats out;
  out.fading.stats = acc.first.stats(seed);
  out.fading.converged = looks_converged(out.fading.stats);
  out.nonfading = acc.second.stats(seed);
  return out;
}

double folded_normal_mean(double location, double std_dev) {
  if (std_dev == 0.0)
    return std::abs(location);
  return std_dev * std::sqrt(2.0 / std::numbers::pi) *
             std::exp(-location * location / (2.0 * std_dev * std_dev)) +
         location * std::erf(location / (std_dev * std::numbers::sqrt2));
}

double calibrate_folded_normal(const FoldedNormalSpec& spec) {
  if (!(spec.target_mean > 0.0) || !std::isfinite(spec.target_mean))
    throw ModelError("folded normal target mean must be finite and > 0");
  if (!(spec.std_dev > 0.0) || !std::isfinite(spec.std_dev))
    throw ModelError("folded normal std_dev must be finite and > 0");
  const double floor = folded_normal_mean(0.0, spec.std_dev);
  if (spec.target_mean < floor)
    throw ModelError("folded normal calibration failed: target mean " +
                     std::to_string(spec.target_mean) + " is below the minimum " +
                     std::to_string(floor) + " reachable with std_dev " +
                     std::to_string(spec.std_dev));
  // The mean is even in the location and increasing on [0, inf).
  auto gap = [&](double mu) { return folded_normal_mean(mu, spec.std_dev) - spec.target_mean; };
  const double hi = spec.target_mean + 10.0 * spec.std_dev;
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [a, b] = boost::math::tools::bisect(gap, 0.0, hi, tol);
  return std::abs(gap(a)) <= std::abs(gap(b)) ? a : b;
}

double sample_folded_normal(double location, double std_dev, Rng& rng) {
  std::normal_distribution<double> normal(location, std_dev);
  double v;
  do {
    v = std::abs(normal(rng));
  } while (v == 0.0);
  return v;
}

SystemModel generate_instance(std::size_t k, const FoldedNormalSpec& ch_spec,
                              const FoldedNormalSpec& ob_spec, std::uint64_t seed,
                              double sigma_theta_sq) {
  if (k == 0)
    throw ModelError("no nodes");
  const double mu_ch = calibrate_folded_normal(ch_spec);
  const double mu_ob = calibrate_folded_normal(ob_spec);
  Rng ch_rng = make_stream(seed, 0);
  Rng ob_rng = make_stream(seed, 1);
  SystemModel m;
  m.sigma_theta_sq = sigma_theta_sq;
  m.links.resize(k);
  for (auto& link : m.links) {
    link.gamma_ch = sample_folded_normal(mu_ch, ch_spec.std_dev, ch_rng);
    link.gamma_ob = sample_folded_normal(mu_ob, ob_spec.std_dev, ob_rng);
  }
  return validate(m);
}

} // namespace dsense
