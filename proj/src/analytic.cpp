#include "dsense/analytic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "dsense/expint.hpp"

namespace dsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ModelError(std::string(what) + " must be finite and > 0");
}

// Per-node quantities of the coded closed form: weight w = 1/lambda and
// u = 1/(1 + gamma_ch).
struct CodedNode {
  double w;
  double u;
};

CodedNode coded_node(const SensorLink& l) {
  const double one_ch = 1.0 + l.gamma_ch;
  return {one_ch * one_ch * l.gamma_ob / ((one_ch + l.gamma_ob) * l.gamma_ch), 1.0 / one_ch};
}

// sum w - (sum w u)^2 / (1 + sum w u^2), evaluated as
// W (1 + sum w (u - ubar)^2) / (1 + sum w u^2) with ubar the w-weighted mean.
// The two are algebraically equal; the second has no cancellation when the
// channel SNRs are tiny and every u is close to one.
template <typename Include>
double coded_term(const SystemModel& model, Include include) {
  double w_sum = 0.0, wu_sum = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (!include(k))
      continue;
    const auto [w, u] = coded_node(model.links[k]);
    w_sum += w;
    wu_sum += w * u;
  }
  if (w_sum == 0.0)
    return 0.0;
  const double u_bar = wu_sum / w_sum;
  double spread = 0.0, wuu_sum = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (!include(k))
      continue;
    const auto [w, u] = coded_node(model.links[k]);
    spread += w * (u - u_bar) * (u - u_bar);
    wuu_sum += w * u * u;
  }
  return w_sum * (1.0 + spread) / (1.0 + wuu_sum);
}

std::pair<double, double> hetero_condition_sums(const SystemModel& model, double& a_sum) {
  double lhs = 0.0, b_sum = 0.0;
  a_sum = 0.0;
  for (const auto& l : model.links) {
    const double denom = 1.0 + l.gamma_ch + l.gamma_ob;
    lhs += (1.0 + 2.0 * l.gamma_ch) * l.gamma_ob / (denom * l.gamma_ch);
    a_sum += l.gamma_ob / (denom * l.gamma_ch);
    b_sum += l.gamma_ob / denom;
  }
  return {lhs, b_sum};
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

SnrLimit parse_limit_value(const std::string& v, std::string_view label) {
  if (v == "inf" || v == "infinity" || v == "infinite")
    return SnrLimit::Infinite;
  if (v == "0" || v == "zero")
    return SnrLimit::Zero;
  if (v == "finite" || v == "fin")
    return SnrLimit::Finite;
  throw ModelError("unknown limit regime '" + std::string(label) + "'");
}

} // namespace

CrossMoments quantization_cross_moments(double sigma_theta_sq, double sigma_ob_sq,
                                        double sigma_qu_sq) {
  require_positive(sigma_theta_sq, "source variance");
  if (!(sigma_ob_sq >= 0.0) || !std::isfinite(sigma_ob_sq))
    throw ModelError("observation noise power must be finite and >= 0");
  require_positive(sigma_qu_sq, "quantization distortion");
  const double obs_power = sigma_ob_sq + sigma_theta_sq;
  return {sigma_ob_sq * sigma_qu_sq / obs_power, sigma_theta_sq * sigma_qu_sq / obs_power};
}

NoiseCovariance total_noise_covariance(const SystemModel& model) {
  validate(model);
  const auto k = static_cast<Eigen::Index>(model.size());
  const double st = model.sigma_theta_sq;
  // ratio_k = sigma_qu_k^2 / (sigma_theta^2 + sigma_ob_k^2)
  Eigen::VectorXd ratio(k);
  Eigen::VectorXd diag(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto [ob, qu] = derived_noise_powers(model, static_cast<std::size_t>(i));
    ratio(i) = qu / (st + ob);
    diag(i) = ob + qu - 2.0 * ob * qu / (st + ob);
  }
  // st * (r_i * r_j) keeps the matrix exactly symmetric.
  NoiseCovariance cov{Eigen::MatrixXd(k, k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    cov.entries(i, i) = diag(i);
    for (Eigen::Index j = 0; j < i; ++j)
      cov.entries(i, j) = cov.entries(j, i) = st * (ratio(i) * ratio(j));
  }
  return cov;
}

NoiseCovariance hybrid_noise_covariance(const SystemModel& model, const CodingPolicy& policy) {
  check_policy(validate(model), policy);
  NoiseCovariance cov = total_noise_covariance(model);
  const auto k = static_cast<Eigen::Index>(model.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    if (policy.rho[static_cast<std::size_t>(i)])
      continue;
    cov.entries.row(i).setZero();
    cov.entries.col(i).setZero();
    cov.entries(i, i) =
        model.sigma_theta_sq / uncoded_node_term(model.links[static_cast<std::size_t>(i)]);
  }
  return cov;
}

namespace {

Eigen::VectorXd solve_ones(const NoiseCovariance& cov) {
  const auto& s = cov.entries;
  if (s.rows() == 0 || s.rows() != s.cols())
    throw ModelError("covariance must be a non-empty square matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw ModelError("covariance is not positive definite");
  Eigen::VectorXd y = llt.solve(Eigen::VectorXd::Ones(s.rows()));
  if (!y.allFinite() || !(y.sum() > 0.0))
    throw ModelError("covariance is not positive definite");
  return y;
}

} // namespace

double blue_distortion(const NoiseCovariance& cov) { return 1.0 / solve_ones(cov).sum(); }

Eigen::VectorXd blue_weights(const NoiseCovariance& cov) {
  Eigen::VectorXd f = solve_ones(cov);
  f /= f.sum();
  return f;
}

double coded_hetero_distortion(const SystemModel& model) {
  validate(model);
  return model.sigma_theta_sq / coded_term(model, [](std::size_t) { return true; });
}

double uncoded_node_term(const SensorLink& l) {
  return l.gamma_ob * l.gamma_ch / (l.gamma_ob + l.gamma_ch + 1.0);
}

double uncoded_hetero_distortion(const SystemModel& model) {
  validate(model);
  double sum = 0.0;
  for (const auto& l : model.links)
    sum += uncoded_node_term(l);
  return model.sigma_theta_sq / sum;
}

double sherman_morrison_check(const SystemModel& model) {
  validate(model);
  if (model.size() > 64)
    throw ModelError("sherman_morrison_check supports K <= 64");
  const auto k = static_cast<Eigen::Index>(model.size());
  const double b = model.sigma_theta_sq;

  // Sigma = diag(lambda') + b u u^T
  Eigen::VectorXd lambda(k), u(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto [w, ui] = coded_node(model.links[static_cast<std::size_t>(i)]);
    lambda(i) = b / w;
    u(i) = ui;
  }
  const Eigen::VectorXd z = u.cwiseQuotient(lambda);
  Eigen::MatrixXd rank_one = -(b / (1.0 + b * u.dot(z))) * z * z.transpose();
  rank_one.diagonal() += lambda.cwiseInverse();

  const Eigen::MatrixXd generic =
      total_noise_covariance(model).entries.partialPivLu().inverse();

  double worst = 0.0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double a = rank_one(i, j), g = generic(i, j);
      const double scale = std::max(std::abs(a), std::abs(g));
      if (scale > 0.0)
        worst = std::max(worst, std::abs(a - g) / scale);
    }
  return worst;
}

double subsystem_distortion(const SystemModel& model, std::span<const std::int8_t> assignment) {
  if (assignment.size() != model.size())
    throw ModelError("assignment length does not match K");
  const double coded =
      coded_term(model, [&](std::size_t k) { return assignment[k] == 1; });
  double uncoded = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k)
    if (assignment[k] == 0)
      uncoded += uncoded_node_term(model.links[k]);
  const double inv = coded + uncoded;
  return inv > 0.0 ? model.sigma_theta_sq / inv : kInf;
}

DistortionBreakdown hybrid_distortion(const SystemModel& model, const CodingPolicy& policy) {
  check_policy(validate(model), policy);
  DistortionBreakdown out;
  std::vector<std::int8_t> assignment(policy.rho.begin(), policy.rho.end());
  out.coded_term = coded_term(model, [&](std::size_t k) { return policy.rho[k] == 1; });
  for (std::size_t k = 0; k < model.size(); ++k)
    if (!policy.rho[k])
      out.uncoded_terms.push_back(uncoded_node_term(model.links[k]));
  out.total = subsystem_distortion(model, assignment);
  return out;
}

double coded_homo_distortion(double k, double gamma_ob, double gamma_ch, double sigma_theta_sq) {
  if (!(k >= 1.0))
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_ch, "channel SNR");
  const double one_ch = 1.0 + gamma_ch;
  return sigma_theta_sq / k *
         (gamma_ch / (one_ch * gamma_ob) + (k + gamma_ch) / (one_ch * one_ch));
}

double uncoded_homo_distortion(double k, double gamma_ob, double gamma_ch,
                               double sigma_theta_sq) {
  if (!(k >= 1.0))
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_ch, "channel SNR");
  return sigma_theta_sq / k * (1.0 / gamma_ob + 1.0 / gamma_ch + 1.0 / (gamma_ob * gamma_ch));
}

double homo_distortion_gap(double k, double gamma_ob, double gamma_ch, double sigma_theta_sq) {
  const double one_ch = 1.0 + gamma_ch;
  return sigma_theta_sq / (k * gamma_ch * one_ch * one_ch) *
         ((k - 2.0) * gamma_ch - 1.0 - one_ch * (2.0 * gamma_ch + 1.0) / gamma_ob);
}

double coded_homo_asymptote(double gamma_ch, double sigma_theta_sq) {
  return sigma_theta_sq / ((1.0 + gamma_ch) * (1.0 + gamma_ch));
}

LimitRegime parse_limit_regime(std::string_view label) {
  // Accept "ob=inf,ch=0", "ob->inf ch->finite" and similar spellings.
  std::string s = lower(label);
  for (auto& c : s)
    if (c == ',' || c == ';' || c == '>' || c == '-' || c == '=' || c == ':')
      c = ' ';
  LimitRegime regime;
  bool seen_ob = false, seen_ch = false;
  std::size_t pos = 0;
  auto next = [&]() -> std::string {
    while (pos < s.size() && s[pos] == ' ')
      ++pos;
    const auto start = pos;
    while (pos < s.size() && s[pos] != ' ')
      ++pos;
    return s.substr(start, pos - start);
  };
  for (std::string key = next(); !key.empty(); key = next()) {
    const std::string value = next();
    if (key == "ob" || key == "gamma_ob") {
      regime.gamma_ob = parse_limit_value(value, label);
      seen_ob = true;
    } else if (key == "ch" || key == "gamma_ch") {
      regime.gamma_ch = parse_limit_value(value, label);
      seen_ch = true;
    } else {
      throw ModelError("unknown limit regime '" + std::string(label) + "'");
    }
  }
  if (!seen_ob || !seen_ch)
    throw ModelError("unknown limit regime '" + std::string(label) + "'");
  return regime;
}

Scheme parse_scheme(std::string_view name) {
  const auto s = lower(name);
  if (s == "coded")
    return Scheme::Coded;
  if (s == "uncoded")
    return Scheme::Uncoded;
  throw ModelError("unknown scheme '" + std::string(name) + "'");
}

double limiting_distortion(Scheme scheme, LimitRegime regime, double k, double gamma_ob,
                           double gamma_ch, double sigma_theta_sq) {
  if (!(k >= 1.0))
    throw ModelError("node count must be >= 1");
  using enum SnrLimit;
  const auto ob = regime.gamma_ob, ch = regime.gamma_ch;
  if (ob == Finite)
    require_positive(gamma_ob, "observation SNR");
  if (ch == Finite)
    require_positive(gamma_ch, "channel SNR");

  if (scheme == Scheme::Coded) {
    if (ch == Zero)
      return sigma_theta_sq;
    if (ob == Zero)
      return kInf;
    if (ob == Infinite && ch == Infinite)
      return 0.0;
    if (ob == Infinite)
      return (k + gamma_ch) / (k * (1.0 + gamma_ch) * (1.0 + gamma_ch)) * sigma_theta_sq;
    if (ch == Infinite)
      return sigma_theta_sq / (k * gamma_ob);
    return coded_homo_distortion(k, gamma_ob, gamma_ch, sigma_theta_sq);
  }

  if (ob == Zero || ch == Zero)
    return kInf;
  if (ob == Infinite && ch == Infinite)
    return 0.0;
  if (ob == Infinite)
    return sigma_theta_sq / (k * gamma_ch);
  if (ch == Infinite)
    return sigma_theta_sq / (k * gamma_ob);
  return uncoded_homo_distortion(k, gamma_ob, gamma_ch, sigma_theta_sq);
}

bool coded_wins_homo(std::size_t k, double gamma_ob, double gamma_ch) {
  if (k == 0)
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_ch, "channel SNR");
  if (k <= 2)
    return true;
  // gamma_ob < (g+1)(2g+1) / max((K-2) g - 1, 0+), without the division.
  const double den = static_cast<double>(k - 2) * gamma_ch - 1.0;
  if (den <= 0.0)
    return true;
  return gamma_ob * den < (gamma_ch + 1.0) * (2.0 * gamma_ch + 1.0);
}

CodedRegion coded_region(std::size_t k, double gamma_ob) {
  if (k < 3)
    throw ModelError("coded-region boundary is defined for K >= 3");
  require_positive(gamma_ob, "observation SNR");
  const double km2 = static_cast<double>(k) - 2.0;
  const double kd = static_cast<double>(k);
  CodedRegion r;
  r.gamma_ob_star = (3.0 * kd - 2.0 + 2.0 * std::sqrt(2.0 * (kd * kd - kd))) / (km2 * km2);
  const double disc = km2 * km2 * gamma_ob * gamma_ob - (6.0 * kd - 4.0) * gamma_ob + 1.0;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    r.gamma_ch_roots = std::pair{(km2 * gamma_ob - 3.0 - root) / 4.0,
                                 (km2 * gamma_ob - 3.0 + root) / 4.0};
  }
  return r;
}

double max_coded_nodes(double gamma_ob, double gamma_ch) {
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_ch, "channel SNR");
  return 2.0 + 1.0 / gamma_ch + (gamma_ch + 1.0) * (2.0 * gamma_ch + 1.0) / (gamma_ob * gamma_ch);
}

TotalPowerDistortions total_power_distortions(double k, double gamma_ob, double gamma_total,
                                              double sigma_theta_sq) {
  if (!(k >= 1.0))
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_total, "total channel SNR");
  const double kg = k + gamma_total;
  return {sigma_theta_sq * (gamma_total / (k * kg * gamma_ob) + (k * k + gamma_total) / (kg * kg)),
          sigma_theta_sq * (1.0 / (k * gamma_ob) + 1.0 / gamma_total +
                            1.0 / (gamma_ob * gamma_total))};
}

TotalPowerDistortions total_power_limits(double gamma_ob, double gamma_total,
                                         double sigma_theta_sq) {
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_total, "total channel SNR");
  return {sigma_theta_sq,
          sigma_theta_sq * (1.0 / gamma_total + 1.0 / (gamma_ob * gamma_total))};
}

bool coded_wins_total(std::size_t k, double gamma_ob, double gamma_total) {
  if (k == 0)
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_total, "total channel SNR");
  if (k <= 2)
    return true;
  const double kd = static_cast<double>(k);
  const double den = (kd * kd - 2.0 * kd) * gamma_total - kd * kd;
  if (den <= 0.0)
    return true;
  return gamma_ob * den < (gamma_total + kd) * (2.0 * gamma_total + kd);
}

std::optional<double> total_power_crossover(double gamma_ob, double gamma_total) {
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_total, "total channel SNR");
  // Uncoded wins iff a K^2 - b K - c > 0 with
  //   a = gamma_ob (gamma_total - 1) - 1, b = (2 gamma_ob + 3) gamma_total,
  //   c = 2 gamma_total^2.
  // With a <= 0 the quadratic never turns positive for K > 0.
  const double a = gamma_ob * (gamma_total - 1.0) - 1.0;
  if (a <= 0.0)
    return std::nullopt;
  const double b = (2.0 * gamma_ob + 3.0) * gamma_total;
  const double c = 2.0 * gamma_total * gamma_total;
  return (b + std::sqrt(b * b + 4.0 * a * c)) / (2.0 * a);
}

HeteroCondition coded_wins_hetero(const SystemModel& model) {
  validate(model);
  double a_sum = 0.0;
  const auto [lhs, b_sum] = hetero_condition_sums(model, a_sum);
  const double rhs = b_sum * b_sum;
  const double shifted = (b_sum - 1.0) * (b_sum - 1.0);
  return {lhs > rhs, a_sum + 1.0 > shifted, lhs, rhs};
}

double fading_coded_homo_distortion(double k, double gamma_ob, double gamma_ch, double nu,
                                    double sigma_theta_sq) {
  if (!(k >= 1.0))
    throw ModelError("node count must be >= 1");
  require_positive(gamma_ob, "observation SNR");
  require_positive(gamma_ch, "channel SNR");
  require_positive(nu, "average fading gain");
  const double mean_snr = nu * gamma_ch;
  const double x = 1.0 / mean_snr;
  // e^{x} E_n(x) / (nu gamma_ch) = E[1/(1+h gamma_ch)^n] for h ~ Exp(nu)
  const double first = exp_integral_en_scaled(1, x) / mean_snr;
  const double second = exp_integral_en_scaled(2, x) / mean_snr;
  return sigma_theta_sq / k *
         (1.0 / gamma_ob + (gamma_ob - 1.0) / gamma_ob * first + (k - 1.0) * second);
}

double amplifier_gain(double power, double sigma_theta_sq, double sigma_ob_sq) {
  require_positive(power, "transmit power");
  require_positive(sigma_theta_sq, "source variance");
  if (!(sigma_ob_sq > 0.0))
    throw ModelError("observation noise power must be > 0");
  return power / (sigma_theta_sq + sigma_ob_sq);
}

bool is_capable_node(const SensorLink& link, double gamma_ob_threshold,
                     double gamma_ch_threshold) {
  return link.gamma_ob > gamma_ob_threshold && link.gamma_ch > gamma_ch_threshold;
}

} // namespace dsense
