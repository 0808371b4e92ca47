#include <doctest.h>

#include <cmath>
#include <random>

#include "dsense/analytic.hpp"
#include "dsense/simulate.hpp"
#include "test_support.hpp"

using namespace dsense;

namespace {

constexpr std::uint64_t kMillion = 1'000'000;

// Running mean and standard error of a scalar sample.
struct Sample {
  double n = 0, sum = 0, sum_sq = 0;
  void add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt((sum_sq / n - mean() * mean()) / (n - 1)); }
};

void check_within(const Sample& s, double expected, double n_se = 3.0) {
  INFO("mean " << s.mean() << " expected " << expected << " se " << s.se());
  CHECK(std::abs(s.mean() - expected) <= n_se * s.se());
}

} // namespace

TEST_CASE("coded sampler second moments") {
  const SensorLink link{7, 5};
  const auto [ob, qu] = derived_noise_powers(SystemModel{1.0, {link}}, 0);
  const auto cm = quantization_cross_moments(1.0, ob, qu);
  Rng rng = make_stream(1, 0);
  std::normal_distribution<double> normal;
  Sample dist, qu_ob, qu_theta;
  for (std::uint64_t t = 0; t < kMillion; ++t) {
    const double theta = normal(rng);
    const auto s = sample_coded_recovery(theta, link, 1.0, rng);
    const double n_qu = s.observation - s.recovery;
    const double n_ob = s.observation - theta;
    dist.add(n_qu * n_qu);
    qu_ob.add(n_qu * n_ob);
    qu_theta.add(n_qu * theta);
  }
  check_within(dist, qu);
  check_within(qu_ob, cm.qu_ob);
  check_within(qu_theta, cm.qu_theta);
}

TEST_CASE("coded sampler is lossless at huge channel SNR") {
  Rng rng = make_stream(2, 0);
  for (int t = 0; t < 1000; ++t) {
    const auto s = sample_coded_recovery(0.3, {2, 1e14}, 1.0, rng);
    CHECK(std::abs(s.recovery - s.observation) < 1e-6);
  }
}

TEST_CASE("empirical covariance of the total noise") {
  std::mt19937_64 pick(4);
  for (int model = 0; model < 3; ++model) {
    const auto m = testing::random_model(pick, 3, 0.3, 30);
    const auto cov = total_noise_covariance(m).entries;
    Rng rng = make_stream(240 + model, 0);
    std::normal_distribution<double> normal;
    Sample entry[3][3];
    for (std::uint64_t t = 0; t < kMillion; ++t) {
      const double theta = normal(rng);
      double n[3];
      for (int i = 0; i < 3; ++i) {
        const auto s = sample_coded_recovery(theta, m.links[static_cast<std::size_t>(i)], 1.0, rng);
        n[i] = (s.observation - s.recovery) - (s.observation - theta);
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j <= i; ++j)
          entry[i][j].add(n[i] * n[j]);
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j)
        check_within(entry[i][j], cov(i, j));
  }
}

TEST_CASE("uncoded sampler") {
  SUBCASE("unit amplifier gain passes the observation plus channel noise") {
    // gamma_ob = 1, sigma_theta^2 = 1: P = 2 = sigma_theta^2 + sigma_ob^2.
    Rng rng = make_stream(5, 0);
    const auto s = sample_uncoded_observation(0.7, {1, 2}, 1.0, rng);
    CHECK(s.received == s.estimate);
  }
  SUBCASE("noiseless channel at fixed power recovers theta + n_ob") {
    const double ch_noise = 1e-24, power = 3.0;
    Rng a = make_stream(6, 0), b = make_stream(6, 0);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 100; ++t) {
      const auto s = sample_uncoded_observation(0.4, {4, power / ch_noise}, 1.0, a, ch_noise);
      const double n_ob = std::sqrt(0.25) * normal(b);
      normal(b);
      CHECK(std::abs(s.estimate - (0.4 + n_ob)) < 1e-10);
    }
  }
  SUBCASE("per-node estimation noise variance") {
    const SensorLink link{3, 0.8};
    const double d = 1.0 / 3.0 + 1.0 / amplifier_gain(0.8, 1.0, 1.0 / 3.0);
    Rng rng = make_stream(7, 0);
    std::normal_distribution<double> normal;
    Sample err;
    for (std::uint64_t t = 0; t < kMillion; ++t) {
      const double theta = normal(rng);
      const double e = sample_uncoded_observation(theta, link, 1.0, rng).estimate - theta;
      err.add(e * e);
    }
    check_within(err, d);
  }
}

TEST_CASE("empirical distortion") {
  const auto m = SystemModel::homogeneous(2, 1, 1);
  const auto coded = empirical_distortion(m, CodingPolicy::all_coded(2), kMillion, 11);
  CHECK(std::abs(coded.mean_sq_error - 0.625) <= 3 * coded.std_error);
  CHECK(coded.n_trials == kMillion);
  CHECK(coded.seed == 11);
  const auto uncoded = empirical_distortion(m, CodingPolicy::all_uncoded(2), kMillion, 12);
  CHECK(std::abs(uncoded.mean_sq_error - 1.5) <= 3 * uncoded.std_error);
  const auto mixed = empirical_distortion(m, CodingPolicy::parse("10"), kMillion, 13);
  CHECK(std::abs(mixed.mean_sq_error - 0.75) <= 3 * mixed.std_error);

  CHECK_THROWS_AS(empirical_distortion(m, CodingPolicy::all_coded(3), 10, 1), ModelError);
  CHECK_THROWS_AS(empirical_distortion(m, CodingPolicy::all_coded(2), 0, 1), ModelError);
}

TEST_CASE("determinism across runs and worker counts") {
  const auto m = generate_instance(4, {5, 1.5}, {7, 1.5}, 3);
  const auto p = CodingPolicy::parse("1010");
  const std::uint64_t n = 5 * kTrialsPerChunk + 17;
  const auto a = empirical_distortion(m, p, n, 99, 1);
  const auto b = empirical_distortion(m, p, n, 99, 1);
  const auto c = empirical_distortion(m, p, n, 99, 4);
  for (const auto& other : {b, c}) {
    CHECK(a.mean_sq_error == other.mean_sq_error);
    CHECK(a.std_error == other.std_error);
    CHECK(a.max_value == other.max_value);
  }
  CHECK(empirical_distortion(m, p, n, 100, 1).mean_sq_error != a.mean_sq_error);

  const auto fa = fading_empirical_distortion(SystemModel::homogeneous(3, 7, 5), 0.9, n, 8, FadingGains::Shared, true, 1);
  const auto fb = fading_empirical_distortion(SystemModel::homogeneous(3, 7, 5), 0.9, n, 8, FadingGains::Shared, true, 3);
  CHECK(fa.stats.mean_sq_error == fb.stats.mean_sq_error);
  CHECK(fa.stats.std_error == fb.stats.std_error);
}

TEST_CASE("fading Monte Carlo") {
  SUBCASE("shared gain matches the closed form") {
    for (std::size_t k : {1u, 5u, 30u}) {
      const auto f = fading_empirical_distortion(SystemModel::homogeneous(k, 7, 5), 0.9, 200'000, 21 + k);
      const double closed = fading_coded_homo_distortion(static_cast<double>(k), 7, 5, 0.9);
      INFO("K = " << k);
      CHECK(std::abs(f.stats.mean_sq_error - closed) <= 3 * f.stats.std_error);
      CHECK(f.converged);
    }
  }
  SUBCASE("only nu * gamma_ch matters") {
    const auto a = fading_empirical_distortion(SystemModel::homogeneous(4, 7, 5), 0.9, 50'000, 5);
    const auto b = fading_empirical_distortion(SystemModel::homogeneous(4, 7, 5 * 0.9 / 1e4), 1e4, 50'000, 5);
    CHECK(testing::rel_diff(a.stats.mean_sq_error, b.stats.mean_sq_error) <= 1e-9);
  }
  SUBCASE("independent gains average to less than a shared gain") {
    const auto m = SystemModel::homogeneous(10, 7, 5);
    const auto shared = fading_empirical_distortion(m, 0.9, 50'000, 6, FadingGains::Shared);
    const auto indep = fading_empirical_distortion(m, 0.9, 50'000, 6, FadingGains::Independent);
    CHECK(indep.stats.mean_sq_error < shared.stats.mean_sq_error);
  }
  SUBCASE("uncoded fading average diverges and is flagged") {
    const auto m = SystemModel::homogeneous(5, 7, 5);
    const auto f = fading_empirical_distortion(m, 0.9, kMillion, 7, FadingGains::Shared, false);
    CHECK_FALSE(f.converged);
  }
  CHECK_THROWS_AS(fading_empirical_distortion(SystemModel::homogeneous(1, 1, 1), 0.0, 10, 1), ModelError);
}

TEST_CASE("folded normal calibration and sampling") {
  CHECK(folded_normal_mean(0, 1) == doctest::Approx(std::sqrt(2.0 / M_PI)));
  CHECK(folded_normal_mean(50, 1) == doctest::Approx(50));
  for (double target : {1.3, 5.0, 7.0, 20.0}) {
    const double mu = calibrate_folded_normal({target, 1.5});
    CHECK(folded_normal_mean(mu, 1.5) == doctest::Approx(target).epsilon(1e-12));
  }
  CHECK_THROWS_AS(calibrate_folded_normal({0.5, 1.5}), ModelError);
  CHECK_THROWS_AS(calibrate_folded_normal({5, 0}), ModelError);

  const double mu = calibrate_folded_normal({5, 1.5});
  Rng rng = make_stream(8, 0);
  Sample s;
  for (std::uint64_t t = 0; t < kMillion; ++t)
    s.add(sample_folded_normal(mu, 1.5, rng));
  check_within(s, 5.0);

  const double mu7 = calibrate_folded_normal({7, 1.5});
  bool all_positive = true;
  for (std::uint64_t t = 0; t < kMillion; ++t)
    all_positive &= sample_folded_normal(mu7, 1.5, rng) > 0.0;
  CHECK(all_positive);
}

TEST_CASE("instance generation") {
  const auto degenerate = generate_instance(6, {5, 1e-12}, {7, 1e-12}, 1);
  for (const auto& l : degenerate.links) {
    CHECK(l.gamma_ch == doctest::Approx(5).epsilon(1e-9));
    CHECK(l.gamma_ob == doctest::Approx(7).epsilon(1e-9));
  }
  const auto a = generate_instance(10, {5, 1.5}, {7, 1.5}, 42);
  const auto b = generate_instance(10, {5, 1.5}, {7, 1.5}, 42);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.links[i].gamma_ch == b.links[i].gamma_ch);
    CHECK(a.links[i].gamma_ob == b.links[i].gamma_ob);
  }
  CHECK(generate_instance(10, {5, 1.5}, {7, 1.5}, 43).links[0].gamma_ch != a.links[0].gamma_ch);
  CHECK_THROWS_AS(generate_instance(0, {5, 1.5}, {7, 1.5}, 1), ModelError);
}

TEST_CASE("heterogeneous fading reduces to the homogeneous closed form") {
  const auto f = hetero_fading_distortion(6, {5, 1e-12}, {7, 1e-12}, 0.9, 200'000, 31, FadingGains::Shared);
  const double closed = fading_coded_homo_distortion(6, 7, 5, 0.9);
  CHECK(std::abs(f.fading.stats.mean_sq_error - closed) <= 3 * f.fading.stats.std_error);
  CHECK(f.nonfading.mean_sq_error == doctest::Approx(coded_homo_distortion(6, 7, 5)).epsilon(1e-9));
  CHECK_THROWS_AS(hetero_fading_distortion(0, {5, 1}, {7, 1}, 0.9, 10, 1), ModelError);
}
