// Command-line front end: tune, bench, report.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cgp/errors.hpp"
#include "cgp/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct TuneOptions {
  std::string objective;
  std::string replay;
  std::string command;
  std::string space;
  std::string direction;
  std::string clustering = "kmeans:3";
  std::string kernel = "matern32";
  std::string partition = "learned";
  std::string fixed;
  std::string out;
  int budget = 40;
  int pilot = 10;
  std::uint64_t seed = 0;
  double xi = 1.0;
  double explore = 0.8;
  int min_cluster = 0;
  int candidates = 2048;
  double boundary_weight = 0.0;
  double noise = 0.0;
  int timeout_ms = 600000;
  bool quiet = false;
};

int run_tune(const TuneOptions& o) {
  cgp::ObjectiveSpec spec;
  spec.name = o.objective;
  spec.replay_path = o.replay;
  spec.command = o.command;
  spec.timeout_ms = o.timeout_ms;
  spec.noise_sigma = o.noise;
  if (!o.space.empty()) spec.space = cgp::load_space(o.space);
  if (!o.direction.empty()) spec.direction = cgp::direction_from_string(o.direction);
  const int sources = !o.objective.empty() + !o.replay.empty() + !o.command.empty();
  if (sources != 1) throw cgp::ConfigError("give exactly one of --objective, --replay, --command");

  const cgp::Objective obj = cgp::make_objective(spec, o.seed);
  cgp::EngineConfig cfg;
  cfg.max_samples = o.budget;
  cfg.pilot_size = o.pilot;
  cfg.partition_mode = cgp::partition_mode_from_string(o.partition);
  cfg.clustering = cgp::parse_clustering(o.clustering);
  cfg.clustering.xi = o.xi;
  cfg.clustering.min_cluster_size = o.min_cluster;
  cfg.kernel = cgp::kernel_family_from_string(o.kernel);
  cfg.exploration_rate = o.explore;
  cfg.acquisition.direction = obj.direction;
  cfg.acquisition.candidate_count = o.candidates;
  cfg.acquisition.boundary_weight = o.boundary_weight;
  if (cfg.partition_mode == cgp::PartitionMode::fixed) {
    if (o.fixed.empty()) throw cgp::ConfigError("--partition fixed needs --fixed");
    cfg.fixed = cgp::parse_fixed_partition(o.fixed, obj.space);
  }
  cfg.validate();

  cgp::Optimizer opt(obj.space, cfg, o.seed);
  while (!opt.done()) {
    opt.step(obj.fn);
    const auto& r = opt.result().records.back();
    if (!o.quiet) {
      std::cout << r.step << ' ' << cgp::to_string(r.source);
      for (double v : r.raw) std::cout << ' ' << cgp::format_double(v);
      if (r.ok)
        std::cout << " y=" << cgp::format_double(r.y);
      else
        std::cout << " failed: " << r.error;
      std::cout << " k=" << r.effective_k << " t=" << r.seconds << "s\n";
    }
  }
  const cgp::RunResult& result = opt.result();
  if (!result.has_best) {
    std::cerr << "error: every evaluation failed\n";
    return 2;
  }

  nlohmann::json summary{{"objective", obj.name},
                         {"direction", cgp::to_string(obj.direction)},
                         {"seed", o.seed},
                         {"evaluations", result.records.size()},
                         {"best_x", result.best_x},
                         {"best_y", result.best_y}};
  if (const auto st = cgp::compute_stats(result, obj.known)) {
    summary["delta_argmax"] = st->delta_argmax;
    summary["delta_max"] = st->delta_max;
  }
  std::cout << "best";
  for (double v : result.best_x) std::cout << ' ' << cgp::format_double(v);
  std::cout << " y=" << cgp::format_double(result.best_y) << '\n';

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    cgp::write_trace(fs::path(o.out) / "trace.csv", result, obj.space.dim());
    std::ofstream(fs::path(o.out) / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
  }
  return 0;
}

void print_report(const fs::path& dir) {
  for (const char* name : {"stats.csv", "paired.csv", "components.csv"}) {
    std::ifstream in(dir / name);
    std::cout << "== " << name << '\n' << in.rdbuf() << '\n';
  }
}

int run_bench(const std::string& config_path, const std::string& out, int jobs) {
  cgp::BatchConfig cfg = cgp::load_batch_config(config_path);
  if (jobs > 0) cfg.jobs = jobs;
  const cgp::BatchResult batch = cgp::run_batch(cfg, fs::path(out));
  const std::size_t total = cfg.variants.size() * cfg.seeds.size();
  const std::size_t failed = batch.failed_runs();
  if (failed > 0) std::cerr << failed << " of " << total << " runs failed; see errors.txt\n";
  if (failed == total) return 2;
  cgp::write_report(batch, cfg.checkpoints, fs::path(out) / "report");
  print_report(fs::path(out) / "report");
  return 0;
}

int run_report(const std::string& in) {
  std::vector<int> checkpoints;
  const cgp::BatchResult batch = cgp::load_batch_result(in, &checkpoints);
  cgp::write_report(batch, checkpoints, fs::path(in) / "report");
  print_report(fs::path(in) / "report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered Gaussian process optimizer"};
  app.require_subcommand(1);

  TuneOptions t;
  auto* tune = app.add_subcommand("tune", "Run one optimization");
  tune->add_option("--objective", t.objective, "Registry objective name");
  tune->add_option("--replay", t.replay, "CSV table of recorded evaluations");
  tune->add_option("--command", t.command, "Shell command template with {x0}, {x1}, ...");
  tune->add_option("--space", t.space, "Search space JSON file");
  tune->add_option("--budget", t.budget, "Total evaluations including pilot");
  tune->add_option("--pilot", t.pilot, "Pilot sample count");
  tune->add_option("--seed", t.seed, "Random seed");
  tune->add_option("--direction", t.direction, "maximize or minimize");
  tune->add_option("--clustering", t.clustering, "kmeans:K or dgm:KMAX");
  tune->add_option("--xi", t.xi, "Response weight in clustering features");
  tune->add_option("--explore", t.explore, "Exploration rate");
  tune->add_option("--kernel", t.kernel, "matern12, matern32, matern52 or sqexp");
  tune->add_option("--min-cluster", t.min_cluster, "Smallest cluster kept (0 = d+1)");
  tune->add_option("--partition", t.partition, "learned, single or fixed");
  tune->add_option("--fixed", t.fixed, "bands:DIM:COUNT or split:DIM:THRESHOLD");
  tune->add_option("--candidates", t.candidates, "Candidate pool size");
  tune->add_option("--boundary-weight", t.boundary_weight, "Boundary bonus weight");
  tune->add_option("--noise", t.noise, "Gaussian noise sd added to responses");
  tune->add_option("--timeout", t.timeout_ms, "Command timeout in milliseconds");
  tune->add_option("--out", t.out, "Output directory for trace.csv and summary.json");
  tune->add_flag("--quiet", t.quiet, "Only print the final best point");

  std::string bench_config, bench_out;
  int bench_jobs = 0;
  auto* bench = app.add_subcommand("bench", "Run a batch of variants over seeds");
  bench->add_option("--config", bench_config, "Batch config JSON")->required();
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_option("--jobs", bench_jobs, "Parallel runs (overrides config)");

  std::string report_in;
  auto* report = app.add_subcommand("report", "Rebuild stats tables from bench traces");
  report->add_option("--in", report_in, "Bench output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*tune) return run_tune(t);
    if (*bench) return run_bench(bench_config, bench_out, bench_jobs);
    if (*report) return run_report(report_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
