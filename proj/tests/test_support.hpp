#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dsense/model.hpp"

namespace dsense::testing {

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Random model with log-uniform SNRs in [lo, hi].
inline SystemModel random_model(std::mt19937_64& rng, std::size_t k, double lo = 0.05,
                                double hi = 50.0, double sigma_theta_sq = 1.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  SystemModel m;
  m.sigma_theta_sq = sigma_theta_sq;
  for (std::size_t i = 0; i < k; ++i)
    m.links.push_back({std::exp(u(rng)), std::exp(u(rng))});
  return m;
}

/// Coded heterogeneous distortion exactly as the closed form is usually
/// printed: sigma^2 (sum 1/l - (sum u/l)^2 / (1 + sum u^2/l))^-1.
inline double literal_coded_distortion(const SystemModel& m) {
  double a = 0.0, b = 1.0, c = 0.0;
  for (const auto& l : m.links) {
    const double u = 1.0 / (1.0 + l.gamma_ch);
    const double lambda =
        (1.0 + l.gamma_ch + l.gamma_ob) * l.gamma_ch / ((1.0 + l.gamma_ch) * (1.0 + l.gamma_ch) * l.gamma_ob);
    a += 1.0 / lambda;
    b += u * u / lambda;
    c += u / lambda;
  }
  return m.sigma_theta_sq / (a - c * c / b);
}

} // namespace dsense::testing
