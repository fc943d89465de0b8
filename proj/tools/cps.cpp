// Command-line front end: runs one experiment described by a JSON config and
// writes CSV/JSON artifacts with fixed float formatting, so identical configs
// produce byte-identical outputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cps/conditions.hpp"
#include "cps/coupling.hpp"
#include "cps/ergodics.hpp"
#include "cps/infinite.hpp"
#include "cps/run_config.hpp"
#include "cps/system.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string artifact_path(const cps::RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / (cfg.out_prefix + "_" + name))
      .string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

double opt_number(const json& options, const std::string& key, double fallback) {
  return options.contains(key) ? options.at(key).get<double>() : fallback;
}

int opt_int(const json& options, const std::string& key, int fallback) {
  return options.contains(key) ? options.at(key).get<int>() : fallback;
}

std::vector<double> opt_array(const json& options, const std::string& key) {
  if (!options.contains(key))
    throw cps::ConfigError("options." + key, "missing");
  return options.at(key).get<std::vector<double>>();
}

int run_simulate(const cps::RunConfig& cfg) {
  const std::vector<double> initial = opt_array(cfg.options, "initial");
  const cps::Trajectory traj = cps::simulate(cfg.system, cfg.sim, initial, cfg.law);

  std::string csv = "t";
  const int n = cfg.system.n;
  const std::size_t k = traj.records.front().gaps.size();
  for (int i = 1; i <= n; ++i) csv += ",x_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) csv += ",y_" + std::to_string(i);
  for (std::size_t i = 1; i <= k; ++i) csv += ",z_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) csv += ",r_" + std::to_string(i);
  csv += "\n";
  for (const cps::StateRecord& rec : traj.records) {
    csv += fmt(rec.t);
    for (double v : rec.positions) csv += "," + fmt(v);
    for (double v : rec.ordered) csv += "," + fmt(v);
    for (double v : rec.gaps) csv += "," + fmt(v);
    for (double v : rec.regulation) csv += "," + fmt(v);
    csv += "\n";
  }
  const std::string csv_path = artifact_path(cfg, "trajectory.csv");
  write_text(csv_path, csv);

  json report;
  report["config"] = cps::serialize_config(cfg);
  report["config"].erase("out");  // reports must not depend on where they land
  report["records"] = traj.records.size();
  report["jumps"] = traj.jumps.size();
  report["final_gaps"] = traj.records.back().gaps;
  write_json(artifact_path(cfg, "report.json"), report);
  std::cout << "simulate: " << traj.records.size() << " records, "
            << traj.jumps.size() << " jumps -> " << csv_path << "\n";
  return 0;
}

json condition_json(const cps::ConditionReport& r) {
  return {{"satisfied", r.satisfied},
          {"lhs", r.lhs},
          {"threshold", r.threshold},
          {"margin", r.margin},
          {"notes", r.notes}};
}

int run_check(const cps::RunConfig& cfg) {
  const bool infinite =
      cfg.options.contains("infinite") && cfg.options["infinite"].get<bool>();
  const int m = opt_int(cfg.options, "m", 1);

  json report;
  const cps::AssumptionReport ar =
      cps::check_assumptions(cfg.system, cfg.law, infinite, m);
  report["assumptions"] = {{"valid", ar.valid}, {"issues", ar.issues}};
  if (cfg.system.n >= 2)
    report["unregulated"] = condition_json(cps::check_unregulated(cfg.system, cfg.law));
  if (cfg.system.barrier)
    report["regulated"] = condition_json(cps::check_regulated(cfg.system, cfg.law));
  if (infinite && cfg.system.barrier)
    report["infinite_regulated"] = condition_json(
        cps::check_infinite_regulated(cfg.law, cfg.system.deltas[0]));

  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  write_text(artifact_path(cfg, "check.json"), text);
  return 0;
}

int run_invariant(const cps::RunConfig& cfg) {
  const std::vector<double> init_gaps = opt_array(cfg.options, "initial_gaps");
  const std::string method = cfg.options.contains("method")
                                 ? cfg.options["method"].get<std::string>()
                                 : std::string("ensemble");
  cps::EmpiricalMeasure m;
  json report;
  if (method == "ensemble") {
    const double t = opt_number(cfg.options, "t", cfg.sim.horizon);
    const int replicas = opt_int(cfg.options, "replicas", 1000);
    m = cps::sample_gaps_at(cfg.system, cfg.law, cfg.sim, init_gaps, t, replicas);
    report["method"] = "ensemble";
    report["t"] = t;
    report["replicas"] = replicas;
  } else if (method == "time_average") {
    const double burn_in = opt_number(cfg.options, "burn_in", 0.0);
    const std::vector<double> init = cps::positions_from_gaps(
        init_gaps, cfg.sim.mode, cfg.system.barrier.value_or(0.0));
    const cps::Trajectory traj = cps::simulate(cfg.system, cfg.sim, init, cfg.law);
    m = cps::time_average(traj, burn_in);
    report["method"] = "time_average";
    report["burn_in"] = burn_in;
  } else {
    throw cps::ConfigError("options.method", "expected 'ensemble' or 'time_average'");
  }

  std::string csv;
  for (std::size_t c = 1; c <= m.dim(); ++c)
    csv += (c > 1 ? "," : "") + ("z_" + std::to_string(c));
  csv += "\n";
  for (const auto& s : m.samples) {
    for (std::size_t c = 0; c < s.size(); ++c)
      csv += (c ? "," : "") + fmt(s[c]);
    csv += "\n";
  }
  write_text(artifact_path(cfg, "samples.csv"), csv);

  std::vector<double> mean(m.dim(), 0.0);
  for (const auto& s : m.samples)
    for (std::size_t c = 0; c < s.size(); ++c) mean[c] += s[c];
  for (double& v : mean) v /= static_cast<double>(m.size());
  report["samples"] = m.size();
  report["mean"] = mean;
  if (cfg.options.contains("exp_rate")) {
    const double rate = cfg.options["exp_rate"].get<double>();
    report["ks_vs_exponential"] =
        cps::ks_marginal(m, 0, [rate](double x) {
          return x < 0.0 ? 0.0 : 1.0 - std::exp(-rate * x);
        });
    report["exp_rate"] = rate;
  }
  write_json(artifact_path(cfg, "invariant.json"), report);
  std::cout << "invariant: " << m.size() << " samples, dim " << m.dim() << "\n";
  return 0;
}

int run_tv(const cps::RunConfig& cfg) {
  const std::vector<double> init_a = opt_array(cfg.options, "init_a");
  const std::vector<double> init_b = opt_array(cfg.options, "init_b");
  const std::vector<double> times = opt_array(cfg.options, "times");
  const int replicas = opt_int(cfg.options, "replicas", 1000);
  const cps::ConvergenceReport rep = cps::two_start_convergence(
      cfg.system, cfg.law, cfg.sim, init_a, init_b, times, replicas);

  std::string csv = "t,tv,tv_se\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    csv += fmt(rep.times[i]) + "," + fmt(rep.tv[i]) + "," +
           fmt(rep.tv_std_error[i]) + "\n";
  write_text(artifact_path(cfg, "tv.csv"), csv);

  json report;
  report["times"] = rep.times;
  report["tv"] = rep.tv;
  report["tv_se"] = rep.tv_std_error;
  report["replicas"] = rep.replicas;
  report["marginal_lower_bound"] = rep.marginal_lower_bound;
  write_json(artifact_path(cfg, "tv.json"), report);
  std::cout << "tv: final TV " << fmt(rep.tv.back()) << " at t="
            << fmt(rep.times.back()) << "\n";
  return 0;
}

int run_couple_verify(const cps::RunConfig& cfg) {
  const std::string which = cfg.options.contains("which")
                                ? cfg.options["which"].get<std::string>()
                                : std::string("gap-domination");
  const int paths = opt_int(cfg.options, "paths", 10);
  double worst = -std::numeric_limits<double>::infinity();
  json report;
  report["which"] = which;
  report["paths"] = paths;

  if (which == "gap-domination") {
    std::vector<double> initial(cfg.system.n, 0.0);
    if (cfg.options.contains("initial"))
      initial = opt_array(cfg.options, "initial");
    cps::SimConfig sim = cfg.sim;
    sim.record_steps = true;
    for (int p = 0; p < paths; ++p) {
      sim.master_seed = cps::derive_seed(cfg.sim.master_seed, "replica", p);
      const cps::Trajectory traj = cps::simulate(cfg.system, sim, initial, cfg.law);
      worst = std::max(worst, cps::verify_gap_domination(traj));
    }
  } else if (which == "monotone") {
    const std::vector<double> lo = opt_array(cfg.options, "init_low");
    const std::vector<double> hi = opt_array(cfg.options, "init_high");
    cps::SimConfig sim = cfg.sim;
    for (int p = 0; p < paths; ++p) {
      sim.master_seed = cps::derive_seed(cfg.sim.master_seed, "replica", p);
      const cps::CoupledPair pair =
          cps::simulate_rank_coupled_pair(cfg.system, sim, cfg.law, lo, hi);
      worst = std::max(worst, pair.max_order_violation);
    }
  } else if (which == "h-domination") {
    if (!cfg.system.barrier)
      throw cps::ConfigError("system.barrier", "h-domination needs a barrier");
    const double x0 = opt_number(cfg.options, "x0", *cfg.system.barrier);
    const int k = opt_int(cfg.options, "k", 1);
    for (int p = 0; p < paths; ++p) {
      const std::uint64_t seed =
          cps::derive_seed(cfg.sim.master_seed, "replica", p);
      for (int i = 0; i < k; ++i) {
        const cps::ParticleNoise noise = cps::make_particle_noise(
            seed, i, cfg.law, cfg.sim.horizon, cfg.sim.dt);
        const cps::DominatorPath part = cps::simulate_reflected_particle(
            x0, cfg.system.deltas[0], cfg.system.sigmas[0],
            *cfg.system.barrier, noise);
        const cps::DominatorPath dom = cps::simulate_H(
            x0, cfg.system.deltas[0], cfg.system.sigmas[0],
            *cfg.system.barrier, noise);
        for (std::size_t j = 0; j < part.values.size(); ++j)
          worst = std::max(worst, part.values[j] - dom.values[j]);
      }
    }
  } else {
    throw cps::ConfigError("options.which",
                           "expected gap-domination, monotone or h-domination");
  }

  const bool pass = worst <= 1e-9;
  report["worst_violation"] = worst;
  report["pass"] = pass;
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  write_text(artifact_path(cfg, "couple.json"), text);
  return pass ? 0 : 1;
}

int run_infinite(const cps::RunConfig& cfg) {
  cps::InfiniteInitial initial;
  initial.gamma1 = opt_number(cfg.options, "gamma1", 1.0);
  initial.gamma2 = opt_number(cfg.options, "gamma2", 0.0);
  if (cfg.options.contains("prefix"))
    initial.explicit_prefix = opt_array(cfg.options, "prefix");
  const std::string kind = cfg.options.contains("kind")
                               ? cfg.options["kind"].get<std::string>()
                               : std::string("regulated");

  int k = opt_int(cfg.options, "k", 0);
  json report;
  if (k <= 0) {
    const double epsilon = opt_number(cfg.options, "epsilon", 1e-3);
    const double level_y =
        opt_number(cfg.options, "level_y", cfg.system.barrier.value_or(0.0));
    double max_drift = 0.0;
    for (double d : cfg.system.deltas) max_drift = std::max(max_drift, std::abs(d));
    k = cps::choose_truncation(initial, cfg.law, cfg.system.sigmas[0], max_drift,
                               cfg.sim.horizon, level_y, epsilon,
                               cps::derive_seed(cfg.sim.master_seed, "truncation", 0));
    report["epsilon"] = epsilon;
  }
  report["k"] = k;
  report["kind"] = kind;

  if (kind == "regulated") {
    std::vector<int> coords = {1};
    if (cfg.options.contains("coordinates"))
      coords = cfg.options["coordinates"].get<std::vector<int>>();
    std::vector<double> times = cfg.options.contains("times")
                                    ? opt_array(cfg.options, "times")
                                    : cfg.sim.grid();
    const int replicas = opt_int(cfg.options, "replicas", 100);
    const cps::TightnessReport rep = cps::tightness_diagnostic(
        initial, k, cfg.system, cfg.sim, cfg.law, coords, times, replicas);

    std::string csv = "t";
    for (int j : rep.coordinates) csv += ",q95_z" + std::to_string(j);
    csv += "\n";
    for (std::size_t t = 0; t < rep.times.size(); ++t) {
      csv += fmt(rep.times[t]);
      for (std::size_t j = 0; j < rep.coordinates.size(); ++j)
        csv += "," + fmt(rep.q95[j][t]);
      csv += "\n";
    }
    write_text(artifact_path(cfg, "quantiles.csv"), csv);
    report["coordinates"] = rep.coordinates;
    report["ratio"] = rep.ratio;
    report["replicas"] = replicas;
  } else if (kind == "unregulated") {
    const int m = opt_int(cfg.options, "m", 1);
    const cps::UnregulatedTruncation run = cps::simulate_infinite_unregulated(
        initial, k, cfg.system, m, cfg.sim, cfg.law);
    std::string csv = "t";
    for (int i = 1; i <= k; ++i) csv += ",x_" + std::to_string(i);
    csv += "\n";
    for (std::size_t t = 0; t < run.times.size(); ++t) {
      csv += fmt(run.times[t]);
      for (double v : run.positions[t]) csv += "," + fmt(v);
      csv += "\n";
    }
    write_text(artifact_path(cfg, "positions.csv"), csv);
    json acts = json::array();
    for (const auto& e : run.schedule.events)
      acts.push_back({{"time", e.time},
                      {"particle", e.particle},
                      {"position", e.position},
                      {"level", e.level}});
    report["m"] = m;
    report["initial_active"] = run.schedule.initial_active;
    report["activations"] = acts;
  } else {
    throw cps::ConfigError("options.kind", "expected 'regulated' or 'unregulated'");
  }
  write_json(artifact_path(cfg, "infinite.json"), report);
  std::cout << "infinite: kind " << kind << ", K = " << k << "\n";
  return 0;
}

int dispatch(const cps::RunConfig& cfg) {
  if (cfg.experiment == "simulate") return run_simulate(cfg);
  if (cfg.experiment == "check") return run_check(cfg);
  if (cfg.experiment == "invariant") return run_invariant(cfg);
  if (cfg.experiment == "tv") return run_tv(cfg);
  if (cfg.experiment == "couple-verify") return run_couple_verify(cfg);
  if (cfg.experiment == "infinite") return run_infinite(cfg);
  throw cps::ConfigError("experiment", "unknown experiment '" + cfg.experiment + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-based interacting particle systems: simulation and checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_prefix;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;

  const std::vector<std::string> names = {"simulate",      "check",
                                          "invariant",     "tv",
                                          "couple-verify", "infinite"};
  for (const std::string& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--seed", seed, "override sim.master_seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--workers", workers,
                    "worker count (results are scheduling-independent)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "override output directory");
    sub->add_option("--prefix", out_prefix, "override output file prefix");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    cps::RunConfig cfg = cps::parse_config_file(config_path);
    const std::string sub = app.get_subcommands().front()->get_name();
    if (cfg.experiment != sub) {
      cfg.experiment = sub;
      // re-validate the option keys against the chosen experiment
      cps::config_detail::reject_unknown(cfg.options, "options",
                                         cps::config_detail::option_keys(sub));
    }
    if (seed_set) cfg.sim.master_seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!out_prefix.empty()) cfg.out_prefix = out_prefix;
    return dispatch(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
