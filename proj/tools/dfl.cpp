// dfl: decentralized federated learning simulator.
//
//   dfl run -c cfg.json -o out/ [--set hyper.beta=0.9]...
//   dfl sweep -c cfg.json --axis beta --values 0,0.4,0.8 [-o sweep/]
//   dfl topology inspect -c cfg.json
//   dfl verify
//   dfl analyze --stability -c cfg.json | dfl analyze out/records.csv ...
//
// Exit codes: 0 ok, 1 verification or run failure, 2 config error, 3 divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dfl/analysis.hpp"
#include "dfl/config.hpp"
#include "dfl/error.hpp"
#include "dfl/report.hpp"
#include "dfl/verify.hpp"

namespace fs = std::filesystem;
using namespace dfl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_run(const std::string& dir, const ExperimentConfig& cfg, const RunResult& result) {
  ensure_dir(dir);
  std::ofstream csv(fs::path(dir) / "records.csv");
  if (!csv) throw ConfigError("cannot write records.csv in '" + dir + "'");
  write_records_csv(csv, result.records);
  std::ofstream summary(fs::path(dir) / "summary.json");
  if (!summary) throw ConfigError("cannot write summary.json in '" + dir + "'");
  summary << make_summary(cfg, result).dump(2) << '\n';
}

int cmd_run(const std::string& config, const std::vector<std::string>& overrides, const std::string& out) {
  const ExperimentConfig cfg = load_experiment(config, overrides);
  const RunResult result = run(cfg.run);
  write_run(out, cfg, result);
  if (!result.records.empty()) {
    const RoundRecord& r = result.records.back();
    std::cout << "round " << r.round << " train_loss " << format_double(r.train_loss) << " grad_norm_z_sq "
              << format_double(r.grad_norm_z_sq);
    if (r.test_accuracy) std::cout << " test_accuracy " << format_double(*r.test_accuracy);
    std::cout << '\n';
  }
  return kExitOk;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& overrides, const std::string& axis,
              const std::string& values_text, const std::string& out) {
  const ExperimentConfig base = load_experiment(config, overrides);
  const auto values = split_values(values_text);
  if (values.empty()) throw ConfigError("sweep: --values is empty");
  // Reject bad axis names and values before any run starts.
  for (const auto& v : values) apply_axis(base.run, axis, v).validate();

  ensure_dir(out);
  std::ofstream table(fs::path(out) / "sweep.csv");
  if (!table) throw ConfigError("cannot write sweep.csv in '" + out + "'");
  table << "axis_value,seed,rounds_to_threshold,final_metric,psi,status\n";
  bool any_failed = false;
  for (const auto& value : values) {
    for (std::uint64_t seed : base.sweep.seeds) {
      ExperimentConfig cfg = base;
      cfg.run = apply_axis(base.run, axis, value);
      cfg.run.seed = seed;
      const TopologySpec topo = cfg.run.resolved_topology();
      const double psi = topo.kind == TopologyKind::kRandomDynamic ? sample_round_topology(topo, 0).mixing.psi
                                                                   : metropolis_weights(build_graph(topo)).psi;
      const std::string dir = (fs::path(out) / (axis + "=" + value) / ("seed-" + std::to_string(seed))).string();
      std::string status = "ok";
      std::string rtt;
      std::string final_metric;
      try {
        const RunResult result = run(cfg.run);
        write_run(dir, cfg, result);
        if (const auto r = rounds_to_threshold(result.records, base.sweep.metric, base.sweep.threshold)) {
          rtt = std::to_string(*r);
        }
        if (!result.records.empty()) {
          if (const auto m = metric_value(result.records.back(), base.sweep.metric)) final_metric = format_double(*m);
        }
      } catch (const DivergenceError& e) {
        status = "diverged";
        any_failed = true;
        std::cerr << "sweep " << axis << "=" << value << " seed " << seed << ": " << e.what() << '\n';
      } catch (const Error& e) {
        status = "error";
        any_failed = true;
        std::cerr << "sweep " << axis << "=" << value << " seed " << seed << ": " << e.what() << '\n';
      }
      table << value << ',' << seed << ',' << rtt << ',' << final_metric << ',' << format_double(psi) << ','
            << status << '\n';
      table.flush();
    }
  }
  return any_failed ? kExitFailure : kExitOk;
}

int cmd_topology_inspect(const std::string& config, const std::vector<std::string>& overrides, double alpha) {
  const ExperimentConfig cfg = load_experiment(config, overrides);
  const TopologySpec topo = cfg.run.resolved_topology();
  Graph g;
  MixingMatrix w;
  if (topo.kind == TopologyKind::kRandomDynamic) {
    RoundTopology rt = sample_round_topology(topo, 0);
    g = std::move(rt.graph);
    w = std::move(rt.mixing);
  } else {
    g = build_graph(topo);
    w = metropolis_weights(g);
  }
  json j{{"topology", to_string(topo.kind)},
         {"m", g.node_count()},
         {"edges", g.edges().size()},
         {"connected", g.connected()},
         {"psi", w.psi},
         {"spectral_gap", w.spectral_gap},
         {"alpha", alpha}};
  if (w.psi > 0.0 && w.psi < 1.0) {
    j["kappa_psi"] = kappa_psi(w.psi, alpha);
    j["kappa_psi_order"] = kappa_psi_order(w.psi);
  } else {
    j["kappa_psi"] = nullptr;
    j["kappa_psi_order"] = nullptr;
  }
  if (topo.kind == TopologyKind::kRandomDynamic) j["note"] = "round-0 sample of a per-round topology";
  std::cout << std::setprecision(17);
  print_json(j);
  return kExitOk;
}

int cmd_verify(double perturbation) {
  VerifyOptions opts;
  opts.mixing_perturbation = perturbation;
  const auto results = run_verification(opts);
  print_verification(std::cout, results);
  const bool ok = all_passed(results);
  std::cout << (ok ? "all checks passed" : "verification FAILED") << '\n';
  return ok ? kExitOk : kExitFailure;
}

int cmd_analyze(bool stability, const std::string& config, const std::vector<std::string>& overrides,
                const std::vector<std::string>& csvs) {
  if (stability) {
    if (config.empty()) throw ConfigError("analyze --stability needs -c <config>");
    const ExperimentConfig cfg = load_experiment(config, overrides);
    print_json(to_json(stability_probe(cfg.run, cfg.stability)));
    return kExitOk;
  }
  if (csvs.empty()) throw ConfigError("analyze needs --stability or at least one records.csv");
  json out = json::object();
  for (const auto& path : csvs) {
    try {
      out[path] = analyze_records(load_records_csv(path));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  print_json(out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated learning simulator"};
  app.require_subcommand(1);
  app.footer(describe_defaults());

  std::string config;
  std::string out;
  std::vector<std::string> overrides;

  auto* run_cmd = app.add_subcommand("run", "Run one simulation; writes records.csv and summary.json");
  run_cmd->add_option("-c,--config", config, "Config JSON (or a summary.json)")->required();
  run_cmd->add_option("-o,--out", out, "Output directory")->required();
  run_cmd->add_option("--set", overrides, "Override a config key, e.g. hyper.beta=0.9");

  std::string axis;
  std::string values;
  std::string sweep_out = "sweep";
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one config axis over values and the configured seeds");
  sweep_cmd->add_option("-c,--config", config, "Config JSON")->required();
  sweep_cmd->add_option("--axis", axis, "beta, K, lambda, m, topology or eta")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("-o,--out", sweep_out, "Output directory")->capture_default_str();
  sweep_cmd->add_option("--set", overrides, "Override a config key");

  double alpha = 0.5;
  auto* topo_cmd = app.add_subcommand("topology", "Topology tools");
  topo_cmd->require_subcommand(1);
  auto* inspect_cmd = topo_cmd->add_subcommand("inspect", "Print m, edges, psi, spectral gap and kappa_psi as JSON");
  inspect_cmd->add_option("-c,--config", config, "Config JSON")->required();
  inspect_cmd->add_option("--alpha", alpha, "alpha used for kappa_psi")->capture_default_str();
  inspect_cmd->add_option("--set", overrides, "Override a config key");

  double perturbation = 0.0;
  auto* verify_cmd = app.add_subcommand("verify", "Run the lemma-oracle suite");
  verify_cmd->add_option("--perturb-mixing", perturbation, "Add this to w_01 of every checked matrix (negative control)");

  bool stability = false;
  std::vector<std::string> csvs;
  auto* analyze_cmd = app.add_subcommand("analyze", "Analyze records.csv files, or run the stability probe");
  analyze_cmd->add_flag("--stability", stability, "Run the twin-run stability probe for -c");
  analyze_cmd->add_option("-c,--config", config, "Config JSON");
  analyze_cmd->add_option("--set", overrides, "Override a config key");
  analyze_cmd->add_option("records", csvs, "records.csv files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(config, overrides, out);
    if (*sweep_cmd) return cmd_sweep(config, overrides, axis, values, sweep_out);
    if (*inspect_cmd) return cmd_topology_inspect(config, overrides, alpha);
    if (*verify_cmd) return cmd_verify(perturbation);
    if (*analyze_cmd) return cmd_analyze(stability, config, overrides, csvs);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TopologyError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
