// Command-line front end: experiment runs and one-shot model queries.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsense/analytic.hpp"
#include "dsense/experiments.hpp"
#include "dsense/optimize.hpp"
#include "dsense/simulate.hpp"

namespace {

using namespace dsense;

struct ModelArgs {
  std::optional<std::size_t> k;
  std::vector<double> gamma_ob;
  std::vector<double> gamma_ch;
  double sigma_theta_sq = 1.0;
};

struct OutputArgs {
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 1;
  bool db = false;
};

void add_model_options(CLI::App& cmd, ModelArgs& m) {
  cmd.add_option("--k", m.k, "number of nodes (repeats single SNR values)");
  cmd.add_option("--gamma-ob", m.gamma_ob, "observation SNR, one value or one per node")
      ->required()
      ->delimiter(',');
  cmd.add_option("--gamma-ch", m.gamma_ch, "channel SNR, one value or one per node")
      ->required()
      ->delimiter(',');
  cmd.add_option("--sigma-theta-sq", m.sigma_theta_sq, "source variance");
}

SystemModel build_model(const ModelArgs& a, bool db) {
  std::size_t k = a.k.value_or(std::max(a.gamma_ob.size(), a.gamma_ch.size()));
  auto expand = [&](const std::vector<double>& v, const char* what) {
    if (v.size() == 1)
      return std::vector<double>(k, v.front());
    if (v.size() != k)
      throw ModelError(std::string("--") + what + " needs 1 or K = " + std::to_string(k) + " values");
    return v;
  };
  const auto ob = expand(a.gamma_ob, "gamma-ob");
  const auto ch = expand(a.gamma_ch, "gamma-ch");
  SystemModel m;
  m.sigma_theta_sq = a.sigma_theta_sq;
  for (std::size_t i = 0; i < k; ++i)
    m.links.push_back({db ? db_to_linear(ob[i]) : ob[i], db ? db_to_linear(ch[i]) : ch[i]});
  return validate(m);
}

CodingPolicy build_policy(const std::string& bits, const std::string& scheme, std::size_t k) {
  if (!bits.empty())
    return CodingPolicy::parse(bits);
  if (scheme == "coded")
    return CodingPolicy::all_coded(k);
  if (scheme == "uncoded")
    return CodingPolicy::all_uncoded(k);
  throw ModelError("--scheme must be coded or uncoded");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::map<std::string, std::string> model_params(const SystemModel& m) {
  std::string ob, ch;
  for (const auto& l : m.links) {
    ob += (ob.empty() ? "" : ",") + fmt(l.gamma_ob);
    ch += (ch.empty() ? "" : ",") + fmt(l.gamma_ch);
  }
  return {{"k", std::to_string(m.size())}, {"gamma_ob", ob}, {"gamma_ch", ch},
          {"sigma_theta_sq", fmt(m.sigma_theta_sq)}};
}

void emit(const std::string& name, const std::map<std::string, std::string>& params,
          const OutputArgs& o, const ResultTable& table) {
  const auto format = parse_output_format(o.format);
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary | std::ios::trunc);
    if (!file)
      throw ModelError("cannot write output file '" + o.out + "'");
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  if (format == OutputFormat::Json)
    write_json(name, params, o.seed, table, out);
  else
    write_csv(table, out);
  out.flush();
  if (!out)
    throw ModelError("failed writing output");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distortion analysis of coded, uncoded and hybrid distributed sensing systems"};
  app.require_subcommand(1);

  OutputArgs out_args;
  auto add_output = [&](CLI::App& cmd) {
    cmd.add_option("--out", out_args.out, "output file (run: overrides the spec and $DSENSE_OUTPUT_DIR)");
    cmd.add_option("--format", out_args.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd.add_flag("--db", out_args.db, "SNR inputs are in dB");
  };

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a spec file");
  std::string spec_path;
  std::optional<std::uint64_t> run_seed;
  std::optional<unsigned> run_workers;
  run->add_option("spec", spec_path, "spec file")->required();
  run->add_option("--seed", run_seed, "override the spec seed");
  run->add_option("--workers", run_workers, "worker threads (0: all cores)");
  add_output(*run);

  // list
  auto* list = app.add_subcommand("list", "list registered experiments and their defaults");

  // eval
  auto* eval = app.add_subcommand("eval", "closed-form distortion of a model under a policy");
  ModelArgs eval_model;
  std::string eval_policy, eval_scheme = "coded";
  add_model_options(*eval, eval_model);
  eval->add_option("--policy", eval_policy, "per-node flags, 1 = coded, e.g. 1011");
  eval->add_option("--scheme", eval_scheme, "coded or uncoded for every node when --policy is absent");
  eval->add_option("--seed", out_args.seed, "seed recorded in the output");
  add_output(*eval);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "search for a hybrid coding policy");
  ModelArgs solve_model;
  std::string algo = "global", sort_key = "coded";
  std::size_t group_size = 1;
  add_model_options(*solve_cmd, solve_model);
  solve_cmd->add_option("--algo", algo, "global, pure, group or sorted")
      ->check(CLI::IsMember({"global", "pure", "group", "sorted"}));
  solve_cmd->add_option("--group-size", group_size, "L for the group greedy search");
  solve_cmd->add_option("--sort-key", sort_key, "sorted greedy node order: coded or uncoded")
      ->check(CLI::IsMember({"coded", "uncoded"}));
  solve_cmd->add_option("--seed", out_args.seed, "seed recorded in the output");
  add_output(*solve_cmd);

  // validate
  auto* val = app.add_subcommand("validate", "Monte Carlo distortion against the closed form");
  ModelArgs val_model;
  std::string val_policy, val_scheme = "coded";
  std::uint64_t trials = 1'000'000;
  unsigned val_workers = 0;
  bool strict = false;
  add_model_options(*val, val_model);
  val->add_option("--policy", val_policy, "per-node flags, 1 = coded");
  val->add_option("--scheme", val_scheme, "coded or uncoded for every node when --policy is absent");
  val->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  val->add_option("--seed", out_args.seed, "RNG seed");
  val->add_option("--workers", val_workers, "worker threads (0: all cores)");
  val->add_flag("--strict", strict, "exit with status 3 when outside 3 standard errors");
  add_output(*val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      auto spec = load_spec_file(spec_path);
      if (run_seed)
        spec.params["seed"] = std::to_string(*run_seed);
      if (run_workers)
        spec.params["workers"] = std::to_string(*run_workers);
      if (out_args.db)
        spec.params["snr_unit"] = "db";
      if (!out_args.out.empty())
        spec.output_path = out_args.out;
      if (run->count("--format"))
        spec.format = parse_output_format(out_args.format);
      const auto table = run_experiment(spec);
      std::cout << write_result(spec, table) << '\n';
    } else if (*list) {
      for (const auto& e : experiment_registry()) {
        std::cout << e.name << ": " << e.summary << '\n';
        for (const auto& [key, value] : e.defaults)
          std::cout << "    " << key << " = " << value << '\n';
      }
    } else if (*eval) {
      const auto m = build_model(eval_model, out_args.db);
      const auto p = build_policy(eval_policy, eval_scheme, m.size());
      check_policy(m, p);
      const auto d = hybrid_distortion(m, p);
      ResultTable t;
      t.columns = {"k", "policy", "distortion", "coded_term", "seed"};
      t.add_row({static_cast<std::int64_t>(m.size()), p.to_string(), d.total, d.coded_term,
                 static_cast<std::int64_t>(out_args.seed)});
      emit("eval", model_params(m), out_args, t);
    } else if (*solve_cmd) {
      const auto m = build_model(solve_model, out_args.db);
      const auto a = parse_algorithm(algo);
      const auto r = a == Algorithm::Sorted
                         ? sorted_greedy(m, sort_key == "coded" ? SortKey::CodedSingleNode
                                                                : SortKey::UncodedSingleNode)
                         : solve(m, a, group_size);
      std::string order;
      for (auto i : r.visit_order)
        order += (order.empty() ? "" : " ") + std::to_string(i);
      ResultTable t;
      t.columns = {"algorithm", "k", "policy", "distortion", "evaluations", "visit_order", "seed"};
      t.add_row({std::string(algorithm_name(a)), static_cast<std::int64_t>(m.size()), r.policy.to_string(),
                 r.distortion, static_cast<std::int64_t>(r.evaluations), order,
                 static_cast<std::int64_t>(out_args.seed)});
      auto params = model_params(m);
      params["algo"] = algo;
      params["group_size"] = std::to_string(group_size);
      emit("solve", params, out_args, t);
    } else if (*val) {
      const auto m = build_model(val_model, out_args.db);
      const auto p = build_policy(val_policy, val_scheme, m.size());
      check_policy(m, p);
      const double analytic = hybrid_distortion(m, p).total;
      const auto mc = empirical_distortion(m, p, trials, out_args.seed, val_workers);
      const double z = (mc.mean_sq_error - analytic) / mc.std_error;
      const bool ok = std::abs(z) <= 3.0;
      ResultTable t;
      t.columns = {"k", "policy", "analytic", "empirical", "std_error", "z_score", "within_3se",
                   "n_trials", "seed"};
      t.add_row({static_cast<std::int64_t>(m.size()), p.to_string(), analytic, mc.mean_sq_error,
                 mc.std_error, z, static_cast<std::int64_t>(ok), static_cast<std::int64_t>(mc.n_trials),
                 static_cast<std::int64_t>(out_args.seed)});
      auto params = model_params(m);
      params["n_trials"] = std::to_string(trials);
      emit("validate", params, out_args, t);
      if (strict && !ok)
        return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
