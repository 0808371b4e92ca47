#include "dsense/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "dsense/analytic.hpp"
#include "dsense/optimize.hpp"
#include "dsense/simulate.hpp"

namespace dsense {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty())
      out.push_back(item);
    if (comma == std::string_view::npos)
      break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ModelError("parameter '" + std::string(key) + "': not a number: '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    // Accept integral values written in floating notation such as 1e6.
    const double d = parse_double(key, t);
    if (!(d >= 0.0) || d != std::floor(d) || d > 9.0e18)
      throw ModelError("parameter '" + std::string(key) + "': not a non-negative integer: '" +
                       std::string(text) + "'");
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

// Typed view of the effective parameters of one experiment.
class Params {
public:
  explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {
    const auto unit = raw("snr_unit");
    if (unit != "linear" && unit != "db")
      throw ModelError("parameter 'snr_unit' must be linear or db");
    db_ = unit == "db";
  }

  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw ModelError("missing parameter '" + key + "'");
    return it->second;
  }
  double number(const std::string& key) const { return parse_double(key, raw(key)); }
  std::uint64_t count(const std::string& key) const { return parse_uint(key, raw(key)); }
  /// SNR-valued parameter; converted from dB when snr_unit = db.
  double snr(const std::string& key) const {
    const double v = number(key);
    return db_ ? db_to_linear(v) : v;
  }
  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (auto item : split_list(raw(key)))
      out.push_back(static_cast<std::size_t>(parse_uint(key, item)));
    if (out.empty())
      throw ModelError("parameter '" + key + "' must list at least one value");
    return out;
  }
  std::uint64_t seed() const { return count("seed"); }
  unsigned workers() const { return static_cast<unsigned>(count("workers")); }

private:
  std::map<std::string, std::string> values_;
  bool db_ = false;
};

std::map<std::string, std::string> with_common(std::map<std::string, std::string> m) {
  m.emplace("seed", "1");
  m.emplace("workers", "0");
  m.emplace("snr_unit", "linear");
  return m;
}

std::map<std::string, std::string> with_instances(std::map<std::string, std::string> m) {
  m.emplace("gamma_ch_mean", "5");
  m.emplace("gamma_ch_std", "1.5");
  m.emplace("gamma_ob_mean", "7");
  m.emplace("gamma_ob_std", "1.5");
  return with_common(std::move(m));
}

InstanceDistribution instance_distribution(const Params& p) {
  return {p.snr("gamma_ch_mean"), p.number("gamma_ch_std"), p.snr("gamma_ob_mean"),
          p.number("gamma_ob_std")};
}

std::pair<std::size_t, std::size_t> k_range(const Params& p) {
  const auto lo = static_cast<std::size_t>(p.count("k_min"));
  const auto hi = static_cast<std::size_t>(p.count("k_max"));
  if (lo < 1 || hi < lo)
    throw ModelError("need 1 <= k_min <= k_max");
  return {lo, hi};
}

std::int64_t as_int(std::uint64_t v) { return static_cast<std::int64_t>(v); }
std::int64_t as_int(bool v) { return v ? 1 : 0; }

// Calls fn(i) for i in [0, n) on `workers` threads; fn writes only slot i.
template <typename Fn>
void parallel_for(std::uint64_t n, unsigned workers, Fn fn) {
  if (workers == 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(n, 1)));
  auto work = [&](unsigned w) {
    for (std::uint64_t i = w; i < n; i += workers)
      fn(i);
  };
  if (workers <= 1) {
    work(0);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back(work, w);
}

// Root of a sign change of f on [1, inf): doubles the upper end until f > 0.
std::optional<double> bracket_root(const std::function<double(double)>& f) {
  double lo = 1.0, hi = 2.0;
  if (f(lo) >= 0.0)
    return std::nullopt;
  while (f(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12)
      return std::nullopt;
  }
  std::uintmax_t iters = 200;
  const auto [a, b] =
      boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (a + b);
}

double sign_of(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

ResultTable fig3_d_vs_k(const Params& p) {
  const auto [k_lo, k_hi] = k_range(p);
  const double gob = p.snr("gamma_ob"), gch = p.snr("gamma_ch"), gt = p.snr("gamma_total");
  const double st = p.number("sigma_theta_sq");
  ResultTable t;
  t.columns = {"k", "gamma_ob", "gamma_ch", "gamma_total", "sigma_theta_sq", "coded", "uncoded",
               "coded_total", "uncoded_total", "coded_wins", "coded_wins_total", "seed"};
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double kd = static_cast<double>(k);
    const auto total = total_power_distortions(kd, gob, gt, st);
    t.add_row({as_int(std::uint64_t{k}), gob, gch, gt, st, coded_homo_distortion(kd, gob, gch, st),
               uncoded_homo_distortion(kd, gob, gch, st), total.coded, total.uncoded,
               as_int(coded_wins_homo(k, gob, gch)), as_int(coded_wins_total(k, gob, gt)),
               as_int(p.seed())});
  }
  return t;
}

ResultTable fig4_snr_surface(const Params& p) {
  const auto ks = p.counts("k_list");
  const auto n = static_cast<std::size_t>(p.count("n_grid"));
  const double lo = p.snr("snr_min"), hi = p.snr("snr_max");
  const double st = p.number("sigma_theta_sq");
  if (n < 2 || !(lo > 0.0) || !(hi > lo))
    throw ModelError("need n_grid >= 2 and 0 < snr_min < snr_max");
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  ResultTable t;
  t.columns = {"k",       "gamma_ob", "gamma_ch",   "sigma_theta_sq",   "coded",
               "uncoded", "gap",      "coded_wins", "coded_wins_hetero", "seed"};
  for (auto k : ks) {
    if (k < 1)
      throw ModelError("k_list entries must be >= 1");
    const double kd = static_cast<double>(k);
    for (double gob : grid)
      for (double gch : grid) {
        const auto hetero = coded_wins_hetero(SystemModel::homogeneous(k, gob, gch, st));
        t.add_row({as_int(std::uint64_t{k}), gob, gch, st, coded_homo_distortion(kd, gob, gch, st),
                   uncoded_homo_distortion(kd, gob, gch, st), homo_distortion_gap(kd, gob, gch, st),
                   as_int(coded_wins_homo(k, gob, gch)), as_int(hetero.coded_wins), as_int(p.seed())});
      }
  }
  return t;
}

ResultTable fig5_fading(const Params& p) {
  const auto [k_lo, k_hi] = k_range(p);
  const double nu = p.number("nu"), gob = p.snr("gamma_ob"), gch = p.snr("gamma_ch");
  const double sch = p.number("sigma_ch"), sob = p.number("sigma_ob");
  const auto n_blocks = p.count("n_blocks");
  const auto seed = p.seed();
  ResultTable t;
  t.columns = {"k",          "nu",           "gamma_ob",           "gamma_ch",
               "sigma_ch",   "sigma_ob",     "n_blocks",           "fading_theory",
               "fading_mc",  "fading_mc_se", "hetero_fading_mc",   "hetero_fading_mc_se",
               "nonfading",  "hetero_nonfading", "seed"};
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double kd = static_cast<double>(k);
    // The closed form assumes one gain per block shared by all nodes; the
    // heterogeneous systems fade independently per node.
    const auto homo = fading_empirical_distortion(SystemModel::homogeneous(k, gob, gch), nu, n_blocks,
                                                  derive_seed(seed, k, 1), FadingGains::Shared,
                                                  true, p.workers());
    const auto hetero = hetero_fading_distortion(k, {gch, sch}, {gob, sob}, nu, n_blocks,
                                                 derive_seed(seed, k, 2), FadingGains::Independent,
                                                 p.workers());
    t.add_row({as_int(std::uint64_t{k}), nu, gob, gch, sch, sob, as_int(n_blocks),
               fading_coded_homo_distortion(kd, gob, gch, nu), homo.stats.mean_sq_error,
               homo.stats.std_error, hetero.fading.stats.mean_sq_error, hetero.fading.stats.std_error,
               coded_homo_distortion(kd, gob, gch), hetero.nonfading.mean_sq_error, as_int(seed)});
  }
  return t;
}

ResultTable fig6_hybrid(const Params& p) {
  const auto [k_lo, k_hi] = k_range(p);
  const auto ls = p.counts("l_list");
  const auto n_sim = p.count("n_sim");
  const auto dist = instance_distribution(p);
  ResultTable t;
  t.columns = {"k", "scheme", "l", "normalized_distortion", "policy_error_rate", "n_sim", "seed"};
  for (std::size_t k = k_lo; k <= k_hi; ++k)
    for (const auto& s : compare_algorithms(dist, k, ls, n_sim, p.seed(), p.workers()))
      t.add_row({as_int(std::uint64_t{k}), s.algorithm, as_int(std::uint64_t{s.group_size}),
                 s.normalized_distortion, s.policy_error_rate, as_int(n_sim), as_int(p.seed())});
  return t;
}

ResultTable fig7_greedy(const Params& p) {
  const auto& mode = p.raw("mode");
  const auto ls = p.counts("l_list");
  const auto dist = instance_distribution(p);
  std::size_t k_lo, k_hi;
  std::uint64_t n_sim;
  if (mode == "k_sweep") {
    std::tie(k_lo, k_hi) = k_range(p);
    n_sim = p.raw("n_sim") == "auto" ? 10000 : p.count("n_sim");
  } else if (mode == "l_sweep") {
    k_lo = k_hi = static_cast<std::size_t>(p.count("k"));
    n_sim = p.raw("n_sim") == "auto" ? 5000 : p.count("n_sim");
  } else {
    throw ModelError("parameter 'mode' must be k_sweep or l_sweep");
  }
  ResultTable t;
  t.columns = {"mode", "k", "algorithm", "l", "normalized_distortion", "policy_error_rate", "n_sim", "seed"};
  for (std::size_t k = k_lo; k <= k_hi; ++k)
    for (const auto& s : compare_algorithms(dist, k, ls, n_sim, p.seed(), p.workers())) {
      if (s.algorithm != "pure" && s.algorithm != "sorted" && s.algorithm != "group")
        continue;
      t.add_row({mode, as_int(std::uint64_t{k}), s.algorithm, as_int(std::uint64_t{s.group_size}),
                 s.normalized_distortion, s.policy_error_rate, as_int(n_sim), as_int(p.seed())});
    }
  return t;
}

ResultTable fig8_random_errors(const Params& p) {
  return run_random_error_study(instance_distribution(p), static_cast<std::size_t>(p.count("k")),
                                p.counts("l_list"), p.count("n_sim"), p.seed(), p.workers());
}

const char* limit_label(SnrLimit l) {
  switch (l) {
  case SnrLimit::Zero:
    return "0";
  case SnrLimit::Finite:
    return "finite";
  case SnrLimit::Infinite:
    return "inf";
  }
  return "?";
}

ResultTable tables_limits(const Params& p) {
  const double k = static_cast<double>(p.count("k"));
  const double gob = p.snr("gamma_ob"), gch = p.snr("gamma_ch"), st = p.number("sigma_theta_sq");
  const double big = p.number("snr_large"), small = p.number("snr_small");
  ResultTable t;
  t.columns = {"scheme",   "gamma_ob_limit", "gamma_ch_limit", "k",         "gamma_ob",
               "gamma_ch", "table_value",    "evaluated",      "matches",   "seed"};
  for (auto scheme : {Scheme::Coded, Scheme::Uncoded})
    for (auto ob : {SnrLimit::Infinite, SnrLimit::Finite, SnrLimit::Zero})
      for (auto ch : {SnrLimit::Infinite, SnrLimit::Finite, SnrLimit::Zero}) {
        const double eob = ob == SnrLimit::Zero ? small : ob == SnrLimit::Infinite ? big : gob;
        // Both SNRs vanishing: the channel limit is taken first.
        const double ech = ch == SnrLimit::Zero ? (ob == SnrLimit::Zero ? small * small : small)
                           : ch == SnrLimit::Infinite ? big
                                                      : gch;
        const double table = limiting_distortion(scheme, {ob, ch}, k, gob, gch, st);
        const double eval = scheme == Scheme::Coded ? coded_homo_distortion(k, eob, ech, st)
                                                    : uncoded_homo_distortion(k, eob, ech, st);
        bool match;
        if (std::isinf(table))
          match = eval > 1e6 * st;
        else if (table == 0.0)
          match = eval <= 1e-4 * st;
        else
          match = std::abs(eval - table) <= 1e-4 * std::abs(table);
        t.add_row({std::string(scheme == Scheme::Coded ? "coded" : "uncoded"), std::string(limit_label(ob)),
                   std::string(limit_label(ch)), static_cast<std::int64_t>(k), eob, ech, table, eval,
                   as_int(match), as_int(p.seed())});
      }
  return t;
}

ResultTable crossover_roots(const Params& p) {
  const double gob = p.snr("gamma_ob"), gch = p.snr("gamma_ch"), gt = p.snr("gamma_total");
  ResultTable t;
  t.columns = {"constraint", "gamma_ob", "channel_snr", "closed_form_root", "numerical_root",
               "delta_at_floor", "delta_at_ceil", "seed"};
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  auto row = [&](const char* name, double snr, std::optional<double> closed,
                 const std::function<double(double)>& delta) {
    const auto numeric = bracket_root(delta);
    const double at = closed ? *closed : numeric.value_or(kNaN);
    const double fl = std::isfinite(at) ? sign_of(delta(std::max(1.0, std::floor(at)))) : kNaN;
    const double ce = std::isfinite(at) ? sign_of(delta(std::ceil(at))) : kNaN;
    t.add_row({std::string(name), gob, snr, closed.value_or(kNaN), numeric.value_or(kNaN), fl, ce,
               as_int(p.seed())});
  };
  row("individual", gch, max_coded_nodes(gob, gch),
      [&](double k) { return coded_homo_distortion(k, gob, gch) - uncoded_homo_distortion(k, gob, gch); });
  row("total", gt, total_power_crossover(gob, gt), [&](double k) {
    const auto d = total_power_distortions(k, gob, gt);
    return d.coded - d.uncoded;
  });
  return t;
}

using Runner = ResultTable (*)(const Params&);

struct Registered {
  ExperimentInfo info;
  Runner run;
};

const std::vector<Registered>& registry() {
  static const std::vector<Registered> r = {
      {{"fig3_d_vs_k",
        "homogeneous coded/uncoded distortion versus K, individual and total power",
        with_common({{"k_min", "1"}, {"k_max", "30"}, {"gamma_ob", "7"}, {"gamma_ch", "5"},
                     {"gamma_total", "5"}, {"sigma_theta_sq", "1"}})},
       fig3_d_vs_k},
      {{"fig4_snr_surface", "homogeneous distortion and winning scheme over an SNR grid",
        with_common({{"k_list", "3,30"}, {"n_grid", "40"}, {"snr_min", "0.1"}, {"snr_max", "100"},
                     {"sigma_theta_sq", "1"}})},
       fig4_snr_surface},
      {{"fig5_fading", "coded distortion with and without block fading",
        with_common({{"k_min", "1"}, {"k_max", "30"}, {"nu", "0.9"}, {"gamma_ob", "7"}, {"gamma_ch", "5"},
                     {"sigma_ch", "1.5"}, {"sigma_ob", "1.5"}, {"n_blocks", "100000"}})},
       fig5_fading},
      {{"fig6_hybrid", "normalized distortion of single-scheme and hybrid policies versus K",
        with_instances({{"k_min", "2"}, {"k_max", "10"}, {"l_list", "1,10,32"}, {"n_sim", "10000"}})},
       fig6_hybrid},
      {{"fig7_greedy", "greedy policy search quality versus K (k_sweep) or group size (l_sweep)",
        with_instances({{"mode", "k_sweep"}, {"k_min", "2"}, {"k_max", "10"}, {"k", "10"},
                        {"l_list", "1,10,32"}, {"n_sim", "auto"}})},
       fig7_greedy},
      {{"fig8_random_errors", "group greedy versus policies with random errors",
        with_instances({{"k", "10"}, {"l_list", "1,2,4,8,16,32"}, {"n_sim", "5000"}})},
       fig8_random_errors},
      {{"tables_limits", "limiting distortions of homogeneous systems",
        with_common({{"k", "5"}, {"gamma_ob", "3"}, {"gamma_ch", "2"}, {"sigma_theta_sq", "1"},
                     {"snr_large", "1e9"}, {"snr_small", "1e-9"}})},
       tables_limits},
      {{"crossover_roots", "node counts where the uncoded scheme starts to win",
        with_common({{"gamma_ob", "7"}, {"gamma_ch", "5"}, {"gamma_total", "5"}})},
       crossover_roots},
  };
  return r;
}

const Registered& find(std::string_view name) {
  for (const auto& r : registry())
    if (r.info.name == name)
      return r;
  std::string known;
  for (const auto& r : registry())
    known += (known.empty() ? "" : ", ") + r.info.name;
  throw ModelError("unknown experiment '" + std::string(name) + "' (known: " + known + ")");
}

void write_cell(const Cell& c, std::ostream& out) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) {
    out << *i;
  } else if (const auto* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) {
      out << "nan";
    } else if (std::isinf(*d)) {
      out << (*d > 0 ? "inf" : "-inf");
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", *d);
      out << buf;
    }
  } else {
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) {
      out << s;
    } else {
      out << '"';
      for (char ch : s)
        out << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
      out << '"';
    }
  }
}

} // namespace

OutputFormat parse_output_format(std::string_view name) {
  if (name == "csv")
    return OutputFormat::Csv;
  if (name == "json")
    return OutputFormat::Json;
  throw ModelError("unknown format '" + std::string(name) + "' (expected csv or json)");
}

ExperimentSpec parse_spec(std::string_view text) {
  ExperimentSpec spec;
  std::map<std::string, std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ModelError("spec line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty())
      throw ModelError("spec line " + std::to_string(line_no) + ": empty key");
    if (!seen.emplace(key, value).second)
      throw ModelError("spec line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    if (key == "experiment")
      spec.name = value;
    else if (key == "output")
      spec.output_path = value;
    else if (key == "format")
      spec.format = parse_output_format(value);
    else
      spec.params[key] = value;
  }
  if (spec.name.empty())
    throw ModelError("spec has no 'experiment' entry");
  check_spec(spec);
  return spec;
}

ExperimentSpec load_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ModelError("cannot read spec file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> v;
    for (const auto& r : registry())
      v.push_back(r.info);
    return v;
  }();
  return infos;
}

void check_spec(const ExperimentSpec& spec) {
  const auto& r = find(spec.name);
  for (const auto& [key, value] : spec.params)
    if (!r.info.defaults.contains(key))
      throw ModelError("experiment '" + spec.name + "' has no parameter '" + key + "'");
}

std::map<std::string, std::string> effective_params(const ExperimentSpec& spec) {
  auto params = find(spec.name).info.defaults;
  for (const auto& [key, value] : spec.params)
    params[key] = value;
  return params;
}

void ResultTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw std::logic_error("row width does not match the header");
  rows.push_back(std::move(row));
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  check_spec(spec);
  const Params params(effective_params(spec));
  params.seed();
  return find(spec.name).run(params);
}

void write_csv(const ResultTable& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i)
        out << ',';
      write_cell(row[i], out);
    }
    out << '\n';
  }
}

void write_json(std::string_view name, const std::map<std::string, std::string>& params,
                std::uint64_t seed, const ResultTable& table, std::ostream& out) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["spec"]["name"] = name;
  doc["spec"]["params"] = params;
  doc["seed"] = seed;
  doc["rows"] = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json obj = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      std::visit([&](const auto& v) { obj[table.columns[i]] = v; }, row[i]);
    doc["rows"].push_back(std::move(obj));
  }
  // Non-finite doubles serialize as null.
  out << doc.dump(2) << '\n';
}

void write_json(const ExperimentSpec& spec, const ResultTable& table, std::ostream& out) {
  const auto params = effective_params(spec);
  write_json(spec.name, params, parse_uint("seed", params.at("seed")), table, out);
}

std::string resolve_output_path(const ExperimentSpec& spec) {
  if (!spec.output_path.empty())
    return spec.output_path;
  const char* dir = std::getenv(kOutputDirEnv);
  const std::filesystem::path base = dir && *dir ? dir : ".";
  return (base / (spec.name + (spec.format == OutputFormat::Json ? ".json" : ".csv"))).string();
}

std::string write_result(const ExperimentSpec& spec, const ResultTable& table) {
  const auto path = resolve_output_path(spec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ModelError("cannot write output file '" + path + "'");
  if (spec.format == OutputFormat::Json)
    write_json(spec, table, out);
  else
    write_csv(table, out);
  out.flush();
  if (!out)
    throw ModelError("failed writing output file '" + path + "'");
  return path;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed + 0x9e3779b97f4a7c15ULL);
  for (std::uint64_t v : {a, b, c})
    h = mix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  return h;
}

SystemModel policy_instance(const InstanceDistribution& dist, std::size_t k, std::uint64_t seed,
                            std::uint64_t n) {
  return generate_instance(k, {dist.gamma_ch_mean, dist.gamma_ch_std},
                           {dist.gamma_ob_mean, dist.gamma_ob_std}, derive_seed(seed, k, n));
}

std::vector<AlgorithmScore> compare_algorithms(const InstanceDistribution& dist, std::size_t k,
                                               std::span<const std::size_t> group_sizes,
                                               std::uint64_t n_sim, std::uint64_t seed,
                                               unsigned workers) {
  if (n_sim == 0)
    throw ModelError("n_sim must be >= 1");
  for (auto l : group_sizes)
    if (l < 1)
      throw ModelError("group sizes must be >= 1");
  // Slots: global, coded, uncoded, pure, sorted, then one per group size.
  const std::size_t n_alg = 5 + group_sizes.size();
  std::vector<double> dist_sum(n_sim * n_alg);
  std::vector<CodingPolicy> policies(n_sim * n_alg);
  parallel_for(n_sim, workers, [&](std::uint64_t n) {
    const auto m = policy_instance(dist, k, seed, n);
    const auto base = n * n_alg;
    auto put = [&](std::size_t slot, CodingPolicy p, double d) {
      policies[base + slot] = std::move(p);
      dist_sum[base + slot] = d;
    };
    const auto g = global_search(m);
    put(0, g.policy, g.distortion);
    put(1, CodingPolicy::all_coded(k), coded_hetero_distortion(m));
    put(2, CodingPolicy::all_uncoded(k), uncoded_hetero_distortion(m));
    const auto pg = pure_greedy(m);
    put(3, pg.policy, pg.distortion);
    const auto sg = sorted_greedy(m);
    put(4, sg.policy, sg.distortion);
    for (std::size_t j = 0; j < group_sizes.size(); ++j) {
      const auto gg = group_greedy(m, group_sizes[j]);
      put(5 + j, gg.policy, gg.distortion);
    }
  });

  std::vector<AlgorithmScore> out;
  auto score = [&](std::size_t slot, std::string name, std::size_t l) {
    std::vector<double> a(n_sim), o(n_sim);
    std::vector<CodingPolicy> pa(n_sim), po(n_sim);
    for (std::uint64_t n = 0; n < n_sim; ++n) {
      a[n] = dist_sum[n * n_alg + slot];
      o[n] = dist_sum[n * n_alg];
      pa[n] = policies[n * n_alg + slot];
      po[n] = policies[n * n_alg];
    }
    out.push_back({std::move(name), l, normalized_distortion(std::span<const double>(a), std::span<const double>(o)),
                   policy_error_rate(pa, po)});
  };
  score(0, "global", 0);
  score(1, "coded", 0);
  score(2, "uncoded", 0);
  score(3, "pure", 0);
  score(4, "sorted", 0);
  for (std::size_t j = 0; j < group_sizes.size(); ++j)
    score(5 + j, "group", group_sizes[j]);
  return out;
}

ResultTable run_random_error_study(const InstanceDistribution& dist, std::size_t k,
                                   std::span<const std::size_t> group_sizes, std::uint64_t n_sim,
                                   std::uint64_t seed, unsigned workers) {
  if (k > kGlobalSearchMaxNodes)
    throw ModelError("random-error study needs K <= " + std::to_string(kGlobalSearchMaxNodes));
  if (n_sim == 0)
    throw ModelError("n_sim must be >= 1");
  for (auto l : group_sizes)
    if (l < 1)
      throw ModelError("group sizes must be >= 1");

  std::vector<SystemModel> models(n_sim);
  std::vector<PolicySearchResult> optimal(n_sim);
  parallel_for(n_sim, workers, [&](std::uint64_t n) {
    models[n] = policy_instance(dist, k, seed, n);
    optimal[n] = global_search(models[n]);
  });
  std::vector<double> opt_d(n_sim);
  std::vector<CodingPolicy> opt_p(n_sim);
  for (std::uint64_t n = 0; n < n_sim; ++n) {
    opt_d[n] = optimal[n].distortion;
    opt_p[n] = optimal[n].policy;
  }

  ResultTable t;
  t.columns = {"k", "l", "family", "flip_probability", "normalized_distortion", "policy_error_rate",
               "n_sim", "seed"};
  for (auto l : group_sizes) {
    std::vector<double> d(n_sim);
    std::vector<CodingPolicy> p(n_sim);
    parallel_for(n_sim, workers, [&](std::uint64_t n) {
      auto r = group_greedy(models[n], l);
      d[n] = r.distortion;
      p[n] = std::move(r.policy);
    });
    const double eps = policy_error_rate(p, opt_p);
    t.add_row({as_int(std::uint64_t{k}), as_int(std::uint64_t{l}), std::string("group_greedy"), eps,
               normalized_distortion(std::span<const double>(d), std::span<const double>(opt_d)), eps,
               as_int(n_sim), as_int(seed)});

    for (std::uint64_t divisor : {1u, 2u, 3u}) {
      const double flip = eps / static_cast<double>(divisor);
      parallel_for(n_sim, workers, [&](std::uint64_t n) {
        Rng rng = make_stream(derive_seed(seed, k, l, divisor), n);
        std::bernoulli_distribution coin(flip);
        CodingPolicy q = opt_p[n];
        for (auto& bit : q.rho)
          if (coin(rng))
            bit ^= 1u;
        d[n] = hybrid_distortion(models[n], q).total;
        p[n] = std::move(q);
      });
      t.add_row({as_int(std::uint64_t{k}), as_int(std::uint64_t{l}),
                 std::string(divisor == 1 ? "random_eps" : divisor == 2 ? "random_eps_2" : "random_eps_3"),
                 flip, normalized_distortion(std::span<const double>(d), std::span<const double>(opt_d)),
                 policy_error_rate(p, opt_p), as_int(n_sim), as_int(seed)});
    }
  }
  return t;
}

} // namespace dsense
