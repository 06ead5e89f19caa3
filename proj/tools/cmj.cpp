// Command-line front end: deterministic analysis, Monte Carlo experiments,
// the renewal oracle, tree export, and the built-in verification suite.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cmj/analysis.hpp"
#include "cmj/config.hpp"
#include "cmj/experiments.hpp"
#include "cmj/families.hpp"
#include "cmj/renewal.hpp"
#include "cmj/sim.hpp"
#include "cmj/verify.hpp"

namespace {

constexpr const char* kFamilyKinds =
    "general-pa, mary-search, median-bst, fragmentation, homogeneous";
constexpr const char* kConfigKeys =
    "[family] kind, weights, beta, rho, m, ell, b, dislocation, lifetime; "
    "[schedule] regime, c, p; "
    "[experiment] n_values, replicates, master_seed, mode, outputs, parallelism";

// Exit codes: 0 ok, 1 usage/config, 2 analysis domain error, 3 partial
// experiment failure, 4 verification failure.
enum ExitCode { kOk = 0, kUsage = 1, kDomain = 2, kPartial = 3, kVerifyFail = 4 };

struct FamilyFlags {
  std::string preset;
  std::string kind;
  std::map<std::string, std::string> keys;  // raw config-style values

  void add_to(CLI::App* cmd) {
    cmd->add_option("--family", preset,
                    "family preset: rrt, bst, binary-pyramid, mary, mary-increasing, median, "
                    "linear-pa, frag-uniform, homogeneous");
    cmd->add_option("--kind", kind, std::string("family kind: ") + kFamilyKinds);
    for (const char* k : {"weights", "beta", "rho", "m", "ell", "b", "dislocation", "lifetime"})
      cmd->add_option(std::string("--") + k, keys[k],
                      std::string("family key '") + k + "' (as in the config file)");
  }

  cmj::FamilyModel build() const {
    namespace p = cmj::presets;
    std::map<std::string, std::string> set;
    for (const auto& [k, v] : keys)
      if (!v.empty()) set[k] = v;

    if (!preset.empty()) {
      auto want = [&](const char* k) -> const std::string& {
        auto it = set.find(k);
        if (it == set.end())
          throw cmj::InvalidParams("preset '" + preset + "' needs --" + k);
        return it->second;
      };
      if (preset == "rrt") return p::rrt();
      if (preset == "bst") return p::bst();
      if (preset == "binary-pyramid") return p::binary_pyramid();
      if (preset == "frag-uniform") return p::fragmentation_uniform();
      if (preset == "mary") return cmj::family_from_keys("mary-search", {{"m", want("m")}});
      if (preset == "mary-increasing")
        return p::mary_increasing(static_cast<int>(std::strtol(want("m").c_str(), nullptr, 10)));
      if (preset == "median")
        return cmj::family_from_keys("median-bst", {{"ell", want("ell")}});
      if (preset == "linear-pa")
        return cmj::family_from_keys("general-pa", {{"beta", want("beta")}, {"rho", want("rho")}});
      if (preset == "homogeneous") {
        std::map<std::string, std::string> kv{{"b", "2"}, {"lifetime", "exp:1"}};
        for (const auto& [k, v] : set) kv[k] = v;
        return cmj::family_from_keys("homogeneous", kv);
      }
      throw cmj::InvalidParams("unknown preset '" + preset + "'");
    }
    if (!kind.empty()) return cmj::family_from_keys(kind, set);
    throw cmj::InvalidParams("specify a family with --family or --kind");
  }
};

std::ostream& open_sink(const std::string& out, std::ofstream& file) {
  if (out.empty()) return std::cout;
  file.open(out);
  if (!file) throw std::runtime_error("cannot open output file '" + out + "'");
  return file;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::optional<std::uint64_t> config_value, std::uint64_t fallback) {
  if (flag) return *flag;  // flag beats env beats config
  if (const char* env = std::getenv("CMJ_SEED")) return std::strtoull(env, nullptr, 10);
  if (config_value) return *config_value;
  return fallback;
}

int run_alpha(const FamilyFlags& ff, std::optional<double> p_flag,
              const std::string& regime, double c, double n, bool csv,
              const std::string& out) {
  const cmj::FamilyModel family = ff.build();

  std::optional<cmj::RegimeSchedule> schedule;
  if (!regime.empty()) {
    if (regime == "weak")
      schedule = cmj::RegimeSchedule::weakly();
    else if (regime == "super")
      schedule = cmj::RegimeSchedule::supercritical(c);
    else if (regime == "strong")
      schedule = cmj::RegimeSchedule::strongly();
    else if (regime == "fixed")
      schedule = cmj::RegimeSchedule::fixed(p_flag.value_or(1.0));
    else
      throw cmj::InvalidParams("--regime must be weak, super, strong or fixed");
  } else if (p_flag) {
    schedule = cmj::RegimeSchedule::fixed(*p_flag);
  }

  cmj::AnalysisReport rep;
  if (schedule) {
    rep = cmj::predict(family, *schedule, n);
  } else {
    rep.alpha = cmj::solve_malthusian(family);
    rep.alpha_p = rep.alpha;
    rep.mu_bar = cmj::mu_bar_at(family, rep.alpha);
    rep.e_phi_hat = cmj::expected_phi_hat(family, rep.alpha);
    rep.exponent = 1.0;
    rep.giant_fraction = 1.0 / rep.e_phi_hat;  // p == 1: the whole tree
    rep.p_star = cmj::subcritical_threshold(family);
    rep.p_n = 1.0;
  }

  std::ofstream file;
  std::ostream& os = open_sink(out, file);
  char buf[256];
  if (csv) {
    os << "family,alpha,alpha_p,mu_bar,e_phi_hat,exponent,giant_fraction,p_star,p_n\n";
    std::snprintf(buf, sizeof(buf), "\"%s\",%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  family.describe().c_str(), rep.alpha, rep.alpha_p, rep.mu_bar, rep.e_phi_hat,
                  rep.exponent, rep.giant_fraction, rep.p_star, rep.p_n);
    os << buf;
  } else {
    auto line = [&](const char* k, double v) {
      std::snprintf(buf, sizeof(buf), "%-16s %.12g\n", k, v);
      os << buf;
    };
    os << "family           " << family.describe() << "\n";
    if (schedule) os << "schedule         " << schedule->label() << " at n=" << n << "\n";
    line("alpha", rep.alpha);
    line("alpha_p", rep.alpha_p);
    line("mu_bar", rep.mu_bar);
    line("E_phi_hat", rep.e_phi_hat);
    line("exponent", rep.exponent);
    line("giant_fraction", rep.giant_fraction);
    line("p_star", rep.p_star);
    line("p_n", rep.p_n);
  }
  return kOk;
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                 const std::string& out_flag, int threads_flag) {
  cmj::ExperimentConfig cfg = cmj::parse_config_file(config_path);
  cfg.master_seed = resolve_seed(seed_flag, cfg.master_seed, cfg.master_seed);
  if (!out_flag.empty()) cfg.outputs_dir = out_flag;
  if (threads_flag > 0) cfg.parallelism = threads_flag;

  const cmj::ExperimentReport report = cmj::run_experiment(cfg);

  std::filesystem::create_directories(cfg.outputs_dir);
  const auto raw_path = std::filesystem::path(cfg.outputs_dir) / "raw.csv";
  const auto agg_path = std::filesystem::path(cfg.outputs_dir) / "aggregate.csv";
  {
    std::ofstream os(raw_path);
    cmj::write_raw_csv(report, os);
  }
  {
    std::ofstream os(agg_path);
    cmj::write_aggregate_csv(report, os);
  }
  if (report.failure_count > 0) {
    std::ofstream os(std::filesystem::path(cfg.outputs_dir) / "failures.csv");
    cmj::write_failures_csv(report, os);
  }
  std::cout << "wrote " << raw_path.string() << " and " << agg_path.string() << " ("
            << report.total_count - report.failure_count << "/" << report.total_count
            << " replicates ok)\n";
  return report.excessive_failures() ? kPartial : kOk;
}

int run_renewal(const FamilyFlags& ff, double p, double T, double h, const std::string& out) {
  const cmj::FamilyModel family = ff.build();
  const cmj::RenewalTable tbl = cmj::mean_count(family, p, T, h);
  std::ofstream file;
  std::ostream& os = open_sink(out, file);
  os << "t,mean\n";
  char buf[80];
  for (std::size_t j = 0; j < tbl.t.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", tbl.t[j], tbl.mean[j]);
    os << buf;
  }
  return kOk;
}

int run_export(const FamilyFlags& ff, double n, double p,
               std::optional<std::uint64_t> seed_flag, const std::string& out) {
  const cmj::FamilyModel family = ff.build();
  cmj::SimOptions opts;
  opts.mode = cmj::SimMode::Full;
  cmj::Rng rng(resolve_seed(seed_flag, std::nullopt, 1));
  const cmj::SimOutcome outcome = cmj::simulate(family, n, p, rng, opts);
  std::ofstream file;
  std::ostream& os = open_sink(out, file);
  os << cmj::export_tree(outcome);
  return kOk;
}

int run_verify(const std::string& tier, int threads, std::optional<std::uint64_t> seed_flag) {
  std::vector<int> ids;
  try {
    ids = cmj::criteria_for_tier(tier);
  } catch (const cmj::InvalidParams& e) {
    std::cerr << e.what() << "\nusage: cmj verify --tier fast|full\n";
    return kUsage;
  }
  const std::uint64_t seed = resolve_seed(seed_flag, std::nullopt, cmj::kDefaultVerifySeed);
  const auto results = cmj::run_criteria(ids, threads, seed);
  const bool all = cmj::print_results(results, std::cout);
  std::cout << (all ? "all criteria passed\n" : "some criteria FAILED\n");
  return all ? kOk : kVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("cmjsim: family trees of general branching processes with "
                           "size-dependent bond percolation.\nFamily kinds: ") +
               kFamilyKinds + ".\nConfig keys: " + kConfigKeys + "."};
  app.require_subcommand(1);

  // Uniform flags, honored by every subcommand.
  std::optional<std::uint64_t> seed_flag;
  std::string out_flag;
  int threads_flag = 0;

  // the renewal grid step is spelled --h, so help is long-form only
  app.set_help_flag("--help", "print help");

  auto add_common = [&](CLI::App* cmd) {
    cmd->set_help_flag("--help", "print help");
    cmd->add_option("--seed", seed_flag, "master seed (beats CMJ_SEED env, beats config)");
    cmd->add_option("--out", out_flag, "output file or directory");
    cmd->add_option("--threads", threads_flag, "worker count (0 = hardware)");
  };

  // alpha
  auto* alpha = app.add_subcommand("alpha", "deterministic constants and limit predictions");
  FamilyFlags alpha_family;
  alpha_family.add_to(alpha);
  add_common(alpha);
  std::optional<double> alpha_p_flag;
  std::string alpha_regime;
  double alpha_c = 1.0, alpha_n = 1e6;
  bool alpha_csv = false;
  alpha->add_option("--p", alpha_p_flag, "percolation parameter in (0,1]");
  alpha->add_option("--regime", alpha_regime, "schedule: weak, super, strong, fixed");
  alpha->add_option("--c", alpha_c, "constant for the super schedule (1 - p_n = c/ln n)");
  alpha->add_option("--n", alpha_n, "size at which the schedule is evaluated");
  alpha->add_flag("--csv", alpha_csv, "emit CSV instead of aligned text");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo study from a config file");
  std::string config_path;
  simulate->add_option("config", config_path, "experiment config file")->required();
  add_common(simulate);

  // renewal
  auto* renewal = app.add_subcommand("renewal", "mean of the counted process on a time grid");
  FamilyFlags renewal_family;
  renewal_family.add_to(renewal);
  add_common(renewal);
  double renewal_p = 1.0, renewal_T = 5.0, renewal_h = 1e-3;
  renewal->add_option("--p", renewal_p, "thinning parameter in (0,1]");
  renewal->add_option("--T", renewal_T, "horizon");
  renewal->add_option("--h", renewal_h, "grid step (must divide T)");

  // export
  auto* export_cmd = app.add_subcommand("export", "simulate once and write the tree edge list");
  FamilyFlags export_family;
  export_family.add_to(export_cmd);
  add_common(export_cmd);
  double export_n = 1000.0, export_p = 1.0;
  export_cmd->add_option("--n", export_n, "weight threshold");
  export_cmd->add_option("--p", export_p, "percolation parameter in (0,1]");

  // verify
  auto* verify = app.add_subcommand("verify", "run the built-in verification suite");
  add_common(verify);
  std::string tier = "fast";
  verify->add_option("--tier", tier, "fast (deterministic) or full (includes Monte Carlo)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (alpha->parsed())
      return run_alpha(alpha_family, alpha_p_flag, alpha_regime, alpha_c, alpha_n, alpha_csv,
                       out_flag);
    if (simulate->parsed()) return run_simulate(config_path, seed_flag, out_flag, threads_flag);
    if (renewal->parsed())
      return run_renewal(renewal_family, renewal_p, renewal_T, renewal_h, out_flag);
    if (export_cmd->parsed())
      return run_export(export_family, export_n, export_p, seed_flag, out_flag);
    if (verify->parsed()) return run_verify(tier, threads_flag, seed_flag);
  } catch (const cmj::ConfigError& e) {
    std::cerr << config_path << ":" << e.line << ": " << e.what() << "\n";
    return kUsage;
  } catch (const cmj::Subcritical& e) {
    std::cerr << "subcritical: " << e.what() << "\n";
    return kDomain;
  } catch (const cmj::NoBracket& e) {
    std::cerr << e.what() << "\n";
    return kDomain;
  } catch (const cmj::DomainError& e) {
    std::cerr << e.what() << "\n";
    return kDomain;
  } catch (const cmj::GridError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const cmj::InvalidParams& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
