#include "dsense/model.hpp"

#include <cmath>

namespace dsense {

namespace {

void require_positive(double v, const char* what) {
  if (!std::isfinite(v))
    throw ModelError(std::string("non-finite ") + what);
  if (v <= 0.0)
    throw ModelError(std::string("nonpositive ") + what);
}

std::size_t checked_index(const SystemModel& model, std::size_t k) {
  if (k >= model.size())
    throw ModelError("node index " + std::to_string(k) + " out of range (K = " +
                     std::to_string(model.size()) + ")");
  return k;
}

} // namespace

SystemModel SystemModel::homogeneous(std::size_t k, double gamma_ob, double gamma_ch,
                                     double sigma_theta_sq) {
  SystemModel m;
  m.sigma_theta_sq = sigma_theta_sq;
  m.links.assign(k, SensorLink{gamma_ob, gamma_ch});
  return m;
}

std::size_t CodingPolicy::coded_count() const noexcept {
  std::size_t n = 0;
  for (auto r : rho)
    n += r;
  return n;
}

CodingPolicy CodingPolicy::parse(std::string_view bits) {
  CodingPolicy p;
  for (char c : bits) {
    if (c == '0' || c == '1')
      p.rho.push_back(static_cast<std::uint8_t>(c - '0'));
    else if (c != ',' && c != ' ')
      throw ModelError("policy must be a string of 0/1 flags, got '" + std::string(bits) + "'");
  }
  return p;
}

std::string CodingPolicy::to_string() const {
  std::string s;
  s.reserve(rho.size());
  for (auto r : rho)
    s.push_back(r ? '1' : '0');
  return s;
}

const SystemModel& validate(const SystemModel& model) {
  if (model.links.empty())
    throw ModelError("no nodes");
  require_positive(model.sigma_theta_sq, "source variance");
  require_positive(model.bandwidth, "bandwidth");
  for (const auto& link : model.links) {
    require_positive(link.gamma_ob, "observation SNR");
    require_positive(link.gamma_ch, "channel SNR");
  }
  return model;
}

void check_policy(const SystemModel& model, const CodingPolicy& policy) {
  if (policy.size() != model.size())
    throw ModelError("policy length " + std::to_string(policy.size()) +
                     " does not match K = " + std::to_string(model.size()));
  for (auto r : policy.rho)
    if (r > 1)
      throw ModelError("policy flags must be 0 or 1");
}

NoisePowers derived_noise_powers(const SystemModel& model, std::size_t k) {
  const auto& link = model.links[checked_index(model, k)];
  const double ob = model.sigma_theta_sq / link.gamma_ob;
  return {ob, (model.sigma_theta_sq + ob) / (1.0 + link.gamma_ch)};
}

CodingRates coding_rates(const SystemModel& model, std::size_t k) {
  const auto [ob, qu] = derived_noise_powers(model, k);
  const double gamma_ch = model.links[k].gamma_ch;
  // log1p keeps the channel rate accurate for tiny SNRs.
  return {model.bandwidth * std::log1p(gamma_ch) / std::log(2.0),
          model.bandwidth * std::log2((model.sigma_theta_sq + ob) / qu)};
}

} // namespace dsense
