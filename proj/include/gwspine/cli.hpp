#pragma once

// Experiment runner behind the `gwspine` binary.
//
//   gwspine norming --law geometric:p=0.5 --s 0.5 --depth 40
//   gwspine spine   --law dyadic:m=2 --depth 30 --horizon 10 --replicas 1000
//   gwspine verify  --law finite:0.5,0.5 --depth 3
//   gwspine bursts  --law geometric:p=0.5 --law2 dyadic:m=2 --depth 40
//   gwspine gw      --law geometric:p=0.5 --depth 10 --replicas 1000
//
// Exit codes: 0 success, 1 usage, 2 verification failure, 3 budget exceeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwspine/law_spec.hpp"
#include "gwspine/measure.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/oracle.hpp"
#include "gwspine/parallel.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/random.hpp"
#include "gwspine/spine.hpp"
#include "gwspine/tree.hpp"
#include "gwspine/version.hpp"

namespace gwspine::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kVerificationFailed = 2, kBudgetExceeded = 3 };

class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string command;
  std::string law;
  std::optional<std::string> law2;
  double s = 0.5;
  std::optional<std::size_t> depth;
  std::size_t horizon = 10;
  std::uint64_t cap = 10'000'000;
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  double a = 1.2;
  std::optional<double> b;
  std::optional<std::size_t> tail_start;
  bool explicit_trees = false;
  std::string out = "-";
  std::string format = "csv";
  unsigned threads = 1;
  std::optional<std::string> config_file;

  [[nodiscard]] std::size_t depth_or(std::size_t fallback) const { return depth.value_or(fallback); }

  /// Burst window upper edge: the given b, else min(1.9, 0.95 m).
  [[nodiscard]] double window_b(double mean) const { return b.value_or(std::min(1.9, 0.95 * mean)); }

  /// Everything that determines the output. Worker count and paths are left
  /// out so that identical experiments serialize identically.
  [[nodiscard]] json provenance(std::size_t effective_depth) const {
    json j;
    j["command"] = command;
    j["law"] = law;
    if (law2) j["law2"] = *law2;
    j["s"] = s;
    j["depth"] = effective_depth;
    j["horizon"] = horizon;
    j["cap"] = cap;
    j["replicas"] = replicas;
    j["seed"] = seed;
    j["a"] = a;
    if (b) j["b"] = *b;
    if (tail_start) j["tail_start"] = *tail_start;
    j["explicit"] = explicit_trees;
    j["format"] = format;
    return j;
  }
};

/// Applies keys of a JSON config file on top of the parsed flags.
inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "law") cfg.law = value.get<std::string>();
      else if (key == "law2") cfg.law2 = value.get<std::string>();
      else if (key == "s") cfg.s = value.get<double>();
      else if (key == "depth") cfg.depth = value.get<std::size_t>();
      else if (key == "horizon") cfg.horizon = value.get<std::size_t>();
      else if (key == "cap") cfg.cap = value.get<std::uint64_t>();
      else if (key == "replicas") cfg.replicas = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "a") cfg.a = value.get<double>();
      else if (key == "b") cfg.b = value.get<double>();
      else if (key == "tail_start") cfg.tail_start = value.get<std::size_t>();
      else if (key == "explicit") cfg.explicit_trees = value.get<bool>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "format") cfg.format = value.get<std::string>();
      else if (key == "threads") cfg.threads = value.get<unsigned>();
      else throw UsageError("config file: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw UsageError("config file: bad value for '" + key + "': " + e.what());
    }
  }
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.law.empty()) throw UsageError("--law is required");
  if (!(cfg.s > 0.0 && cfg.s < 1.0)) throw UsageError("--s must lie in (0,1)");
  if (cfg.replicas < 1) throw UsageError("--replicas must be >= 1");
  if (cfg.cap < 1) throw UsageError("--cap must be >= 1");
  if (cfg.format != "csv" && cfg.format != "json") throw UsageError("--format must be csv or json");
  if (cfg.threads < 1) throw UsageError("--threads must be >= 1");
}

inline void check_window(double a, double b, double mean) {
  if (!(1.0 < a && a < b && b < mean)) {
    throw UsageError("burst window needs 1 < a < b < m (a=" + format_double(a) +
                     ", b=" + format_double(b) + ", m=" + format_double(mean) + ")");
  }
}

inline json quantiles_json(const Quantiles& q) {
  return {{"q05", q.q05}, {"q25", q.q25}, {"median", q.median},
          {"q75", q.q75}, {"q95", q.q95}, {"mad", q.mad}};
}

inline std::string header_lines(const ExperimentConfig& cfg, std::size_t depth) {
  return "# gwspine " + std::string(kVersion) + "\n# config " + cfg.provenance(depth).dump() + "\n";
}

inline json envelope(const ExperimentConfig& cfg, std::size_t depth) {
  return {{"tool", "gwspine"}, {"version", kVersion}, {"config", cfg.provenance(depth)}};
}

struct CommandOutput {
  std::string text;
  int code = kOk;
};

inline CommandOutput cmd_norming(const ExperimentConfig& cfg) {
  const auto law = parse_law(cfg.law);
  const std::size_t depth = cfg.depth_or(20);
  const auto table = build_norming_table(law, cfg.s, depth);
  std::ostringstream os;
  if (cfg.format == "csv") {
    os << header_lines(cfg, depth);
    write_norming_csv(table, os);
  } else {
    json j = envelope(cfg, depth);
    j["m"] = law.mean();
    json rows = json::array();
    for (std::size_t n = 0; n <= depth; ++n) {
      json r = {{"n", n}, {"x", table.x(n)}, {"c", table.c(n)}, {"lnD", table.log_d(n)}};
      if (n < depth) {
        r["c_ratio"] = table.x(n) / table.x(n + 1);
        r["D_ratio"] = std::exp(table.log_d(n + 1) - table.log_d(n));
      }
      rows.push_back(r);
    }
    j["rows"] = rows;
    os << j.dump(2) << '\n';
  }
  return {os.str(), kOk};
}

inline CommandOutput cmd_verify(const ExperimentConfig& cfg) {
  const auto law = parse_law(cfg.law);
  if (!law.finite_support()) throw UsageError("verify needs a finite-support law (deterministic or finite)");
  const std::size_t depth = cfg.depth_or(3);
  if (depth < 1) throw UsageError("verify needs --depth >= 1");
  const auto table = build_norming_table(law, cfg.s, depth);
  const auto report = verify_all(law, table, depth);
  std::ostringstream os;
  if (cfg.format == "json") {
    json j = envelope(cfg, depth);
    json checks = json::array();
    for (const auto& c : report.checks) {
      checks.push_back({{"check", c.check}, {"law", c.law}, {"depth", c.depth},
                        {"max_abs_error", c.max_abs_error}, {"tolerance", c.tolerance},
                        {"pass", c.pass}});
    }
    j["checks"] = checks;
    j["pass"] = report.all_pass();
    os << j.dump(2) << '\n';
  } else {
    os << header_lines(cfg, depth) << "check,law,depth,max_abs_error,tolerance,pass\n";
    for (const auto& c : report.checks) {
      os << c.check << ",\"" << c.law << "\"," << c.depth << ',' << format_double(c.max_abs_error)
         << ',' << format_double(c.tolerance) << ',' << (c.pass ? "true" : "false") << '\n';
    }
  }
  return {os.str(), report.all_pass() ? kOk : kVerificationFailed};
}

struct SpineReplica {
  TrajectoryRecord record;
  bool budget_failure = false;
  std::string error;
};

inline CommandOutput cmd_spine(const ExperimentConfig& cfg) {
  const auto law = parse_law(cfg.law);
  const std::size_t depth = cfg.depth_or(30);
  if (depth < 1) throw UsageError("spine needs --depth >= 1");
  if (cfg.horizon < 1) throw UsageError("spine needs --horizon >= 1");
  const double m = law.mean();
  const double b = cfg.window_b(m);
  check_window(cfg.a, b, m);
  const std::size_t total_depth = depth + cfg.horizon;
  const auto table = build_norming_table(law, cfg.s, total_depth);
  const SpineKernels kernels(law, table, total_depth);

  const auto runs = run_replicas(cfg.replicas, cfg.threads, [&](std::size_t r) {
    SpineReplica out;
    Rng rng = replica_stream(cfg.seed, r);
    try {
      const SpineProfile profile =
          cfg.explicit_trees ? profile_of(sample_marked_tree(kernels, total_depth, cfg.cap, rng))
                             : sample_spine_profile(kernels, total_depth, rng);
      out.record = holder_trajectory(profile, table, m, cfg.horizon);
    } catch (const BudgetError& e) {
      out.budget_failure = true;
      out.error = e.what();
    }
    return out;
  });

  std::size_t failures = 0, truncated = 0;
  std::vector<TrajectoryRecord> records;
  for (const auto& run : runs) {
    if (run.budget_failure) {
      ++failures;
      continue;
    }
    if (run.record.truncated) ++truncated;
    records.push_back(run.record);
  }

  std::ostringstream os;
  if (cfg.format == "csv") {
    os << header_lines(cfg, depth)
       << "replica,n,nu_spine,z_n,w_hat_spine,truncated,holder_hat,growth_hat,sibling_mass\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (runs[r].budget_failure) {
        os << "# replica " << r << " budget exceeded: " << runs[r].error << '\n';
        continue;
      }
      const auto& rec = runs[r].record;
      for (const auto& pt : rec.points) {
        os << r << ',' << pt.n << ',' << pt.nu_spine << ',' << pt.z_n << ','
           << format_double(pt.w_hat_spine) << ',' << (rec.truncated ? 1 : 0) << ','
           << format_double(pt.holder_hat) << ',' << format_double(pt.growth_hat) << ','
           << format_double(pt.sibling_mass) << '\n';
      }
    }
  } else {
    json j = envelope(cfg, depth);
    j["family"] = law.family_name();
    j["law"] = law.spec();
    j["m"] = m;
    j["s"] = cfg.s;
    j["N"] = depth;
    j["horizon"] = cfg.horizon;
    j["replicas"] = cfg.replicas;
    j["truncated_replicas"] = truncated;
    j["budget_failures"] = failures;
    j["note"] = "finite-horizon estimates; running extrema are trends, not limits";
    if (!records.empty()) {
      const auto summary = growth_summary(records, table);
      std::vector<double> final_holder;
      std::vector<double> per_n_hits(depth, 0.0);
      double burst_total = 0.0;
      for (const auto& rec : records) {
        final_holder.push_back(rec.points.back().holder_hat);
        for (auto n : burst_scan(rec, cfg.a, b)) {
          per_n_hits[n - 1] += 1.0;
          burst_total += 1.0;
        }
      }
      for (auto& h : per_n_hits) h /= static_cast<double>(records.size());
      j["holder_hat"] = {{"final", quantiles_json(quantiles(final_holder))},
                         {"running_min", quantiles_json(summary.min_holder_q)},
                         {"median_by_n", summary.median_holder_by_n}};
      j["growth_hat"] = {{"running_max", quantiles_json(summary.max_growth_q)},
                         {"median_by_n", summary.median_growth_by_n}};
      j["bound_violations"] = summary.bound_violations;
      j["bursts"] = {{"a", cfg.a},
                     {"b", b},
                     {"mean_count", burst_total / static_cast<double>(records.size())},
                     {"frequency_by_n", per_n_hits}};
    }
    auto sums = burst_partial_sums(law, table, depth, cfg.a, b);
    j["burst_partial_sums"] = sums;
    os << j.dump(2) << '\n';
  }
  const bool over_budget = failures > 0 || (cfg.explicit_trees && truncated > 0);
  return {os.str(), over_budget ? kBudgetExceeded : kOk};
}

struct BurstStudy {
  std::string spec;
  double mean = 0.0;
  double b = 0.0;
  std::vector<double> probs;
  std::vector<double> partial_sums;
  double tail_increment = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double z_score = 0.0;
};

/// Exact S_n plus a Monte Carlo count of bursts over n <= depth.
inline BurstStudy burst_study(const OffspringLaw& law, const ExperimentConfig& cfg,
                              std::size_t depth, std::size_t tail_start, std::uint64_t stream_offset) {
  BurstStudy st;
  st.spec = law.spec();
  st.mean = law.mean();
  st.b = cfg.window_b(st.mean);
  check_window(cfg.a, st.b, st.mean);
  const auto table = build_norming_table(law, cfg.s, depth + 1);
  for (std::size_t n = 0; n <= depth; ++n) st.probs.push_back(spine_burst_prob(law, table, n, cfg.a, st.b));
  st.partial_sums = burst_partial_sums(law, table, depth, cfg.a, st.b);
  CompensatedSum tail;
  for (std::size_t n = tail_start + 1; n <= depth; ++n) tail += st.probs[n];
  st.tail_increment = tail.value();

  const SpineKernels kernels(law, table, depth + 1);
  const auto counts = run_replicas(cfg.replicas, cfg.threads, [&](std::size_t r) {
    Rng rng = replica_stream(cfg.seed, stream_offset + r);
    const auto path = sample_spine_path(kernels, depth + 1, rng);
    return static_cast<double>(burst_count(path, cfg.a, st.b, depth));
  });
  CompensatedSum sum, sq;
  for (double c : counts) sum += c;
  const double n = static_cast<double>(counts.size());
  st.mc_mean = sum.value() / n;
  for (double c : counts) sq += (c - st.mc_mean) * (c - st.mc_mean);
  const double var = counts.size() > 1 ? sq.value() / (n - 1.0) : 0.0;
  st.mc_se = std::sqrt(var / n);
  const double diff = st.mc_mean - st.partial_sums[depth];
  st.z_score = st.mc_se > 0.0 ? diff / st.mc_se : (std::abs(diff) < 1e-12 ? 0.0 : INFINITY);
  return st;
}

inline CommandOutput cmd_bursts(const ExperimentConfig& cfg) {
  const std::size_t depth = cfg.depth_or(40);
  const std::size_t tail_start = cfg.tail_start.value_or(depth >= 10 ? depth - 10 : 0);
  if (tail_start > depth) throw UsageError("--tail-start must not exceed --depth");
  std::vector<BurstStudy> studies;
  studies.push_back(burst_study(parse_law(cfg.law), cfg, depth, tail_start, 0));
  if (cfg.law2) {
    // Second law reads replica streams after the first law's.
    studies.push_back(burst_study(parse_law(*cfg.law2), cfg, depth, tail_start, cfg.replicas));
  }

  std::ostringstream os;
  if (cfg.format == "csv") {
    os << header_lines(cfg, depth) << "law,n,p_n,S_n\n";
    for (const auto& st : studies) {
      for (std::size_t n = 0; n <= depth; ++n) {
        os << '"' << st.spec << "\"," << n << ',' << format_double(st.probs[n]) << ','
           << format_double(st.partial_sums[n]) << '\n';
      }
    }
  } else {
    json j = envelope(cfg, depth);
    j["tail_start"] = tail_start;
    json laws = json::array();
    for (const auto& st : studies) {
      laws.push_back({{"law", st.spec},
                      {"m", st.mean},
                      {"a", cfg.a},
                      {"b", st.b},
                      {"p_n", st.probs},
                      {"S_n", st.partial_sums},
                      {"tail_increment", st.tail_increment},
                      {"monte_carlo",
                       {{"replicas", cfg.replicas},
                        {"mean_count", st.mc_mean},
                        {"standard_error", st.mc_se},
                        {"z_score", st.z_score},
                        {"within_4_se", std::abs(st.z_score) <= 4.0}}}});
    }
    j["laws"] = laws;
    if (studies.size() == 2) {
      const double inc1 = studies[0].tail_increment;
      const double inc2 = studies[1].tail_increment;
      j["comparison"] = {{"tail_increment_law", inc1},
                         {"tail_increment_law2", inc2},
                         {"law2_exceeds_law_10x", inc2 > 10.0 * inc1},
                         {"law_exceeds_law2_10x", inc1 > 10.0 * inc2}};
    }
    os << j.dump(2) << '\n';
  }
  return {os.str(), kOk};
}

inline CommandOutput cmd_gw(const ExperimentConfig& cfg) {
  const auto law = parse_law(cfg.law);
  const std::size_t depth = cfg.depth_or(10);
  const auto table = build_norming_table(law, cfg.s, depth);
  const auto traces = run_replicas(cfg.replicas, cfg.threads, [&](std::size_t r) {
    Rng rng = replica_stream(cfg.seed, r);
    const auto tree = simulate_gw(law, depth, cfg.cap, rng);
    return std::make_pair(tree.populations(), martingale_trace(tree, table));
  });
  std::size_t truncated = 0;
  for (const auto& t : traces) truncated += t.second.truncated ? 1 : 0;

  std::ostringstream os;
  if (cfg.format == "csv") {
    os << header_lines(cfg, depth) << "replica,n,z_n,m_n,dm_n,w_hat\n";
    for (std::size_t r = 0; r < traces.size(); ++r) {
      const auto& [z, trace] = traces[r];
      for (std::size_t n = 0; n < z.size(); ++n) {
        const auto& p = trace.points[n];
        os << r << ',' << n << ',' << z[n] << ',' << format_double(p.m) << ','
           << format_double(p.dm) << ',' << format_double(p.w_hat) << '\n';
      }
    }
  } else {
    json j = envelope(cfg, depth);
    j["m"] = law.mean();
    j["truncated_replicas"] = truncated;
    json by_n = json::array();
    const double count = static_cast<double>(traces.size());
    for (std::size_t n = 0; n <= depth; ++n) {
      CompensatedSum sm, sdm;
      for (const auto& t : traces) {
        sm += t.second.points[n].m;
        sdm += t.second.points[n].dm;
      }
      const double mean_m = sm.value() / count;
      CompensatedSum var;
      for (const auto& t : traces) var += std::pow(t.second.points[n].m - mean_m, 2);
      const double se = count > 1 ? std::sqrt(var.value() / (count - 1.0) / count) : 0.0;
      by_n.push_back({{"n", n}, {"mean_m", mean_m}, {"se_m", se}, {"mean_dm", sdm.value() / count}});
    }
    j["martingales"] = by_n;
    os << j.dump(2) << '\n';
  }
  return {os.str(), truncated > 0 ? kBudgetExceeded : kOk};
}

inline void write_output(const ExperimentConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.out == "-" || cfg.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(cfg.out, std::ios::binary);
  if (!file) throw UsageError("cannot open output file '" + cfg.out + "'");
  file << text;
}

inline CommandOutput dispatch(const ExperimentConfig& cfg) {
  if (cfg.command == "norming") return cmd_norming(cfg);
  if (cfg.command == "spine") return cmd_spine(cfg);
  if (cfg.command == "verify") return cmd_verify(cfg);
  if (cfg.command == "bursts") return cmd_bursts(cfg);
  if (cfg.command == "gw") return cmd_gw(cfg);
  throw UsageError("unknown command '" + cfg.command + "'");
}

/// Parses argv, runs the selected command and writes its output.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Spine decomposition and branching-measure experiments for Galton-Watson trees"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  ExperimentConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--law", cfg.law, "offspring law, e.g. geometric:p=0.5, dyadic:m=2");
    sub->add_option("--s", cfg.s, "norming parameter s in (0,1)");
    sub->add_option("--depth", cfg.depth, "generations N");
    sub->add_option("--out", cfg.out, "output path, - for stdout");
    sub->add_option("--format", cfg.format, "csv or json");
    sub->add_option("--config", cfg.config_file, "JSON file whose keys override flags");
  };
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--cap", cfg.cap, "vertex budget per replica (explicit trees)");
    sub->add_option("--replicas", cfg.replicas, "number of replicas");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--threads", cfg.threads, "worker threads (output does not depend on it)");
  };
  auto add_window = [&](CLI::App* sub) {
    sub->add_option("--a", cfg.a, "burst window lower base, 1 < a < b");
    sub->add_option("--b", cfg.b, "burst window upper base, b < m; default min(1.9, 0.95 m)");
  };

  auto* norming = app.add_subcommand("norming", "norming table c_n, D_n and their ratios");
  add_common(norming);
  auto* spine = app.add_subcommand("spine", "spine simulations with Holder/growth trajectories");
  add_common(spine);
  add_sim(spine);
  add_window(spine);
  spine->add_option("--horizon", cfg.horizon, "horizon k of the W estimates");
  spine->add_flag("--explicit", cfg.explicit_trees, "materialize vertices (subject to --cap)");
  auto* verify = app.add_subcommand("verify", "exact enumeration checks of the measure change");
  add_common(verify);
  auto* bursts = app.add_subcommand("bursts", "exact and Monte Carlo spine burst statistics");
  add_common(bursts);
  add_sim(bursts);
  add_window(bursts);
  bursts->add_option("--law2", cfg.law2, "second law for comparison");
  bursts->add_option("--tail-start", cfg.tail_start, "report S_N - S_tail (default N - 10)");
  auto* gw = app.add_subcommand("gw", "plain Galton-Watson populations and martingales");
  add_common(gw);
  add_sim(gw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  for (auto* sub : {norming, spine, verify, bursts, gw}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }

  try {
    if (cfg.config_file) apply_config_file(cfg, *cfg.config_file);
    validate(cfg);
    const auto result = dispatch(cfg);
    write_output(cfg, result.text, out);
    if (result.code == kVerificationFailed) err << "verification failed\n";
    if (result.code == kBudgetExceeded) err << "budget exceeded in at least one replica\n";
    return result.code;
  } catch (const LawSpecError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return kBudgetExceeded;
  } catch (const std::logic_error& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace gwspine::cli
