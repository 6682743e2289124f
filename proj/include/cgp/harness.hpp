#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgp/engine.hpp"
#include "cgp/objectives.hpp"

namespace cgp {

/// Where the objective comes from: a registry name, a replay table, or an
/// external command.
struct ObjectiveSpec {
  std::string name;
  std::string replay_path;
  std::string command;
  int timeout_ms = 600000;
  /// Raw-space definition; required for replay and command objectives.
  std::optional<SearchSpace> space;
  std::optional<Direction> direction;
  double noise_sigma = 0.0;
};

/// Builds the objective; `seed` drives the noise stream when noise is on.
Objective make_objective(const ObjectiveSpec& spec, std::uint64_t seed);

struct Variant {
  std::string name;
  EngineConfig config;
  /// Source text of the fixed partition, if any ("bands:0:3").
  std::string fixed_spec;
};

struct BatchConfig {
  ObjectiveSpec objective;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  bool shared_pilot = true;
  /// Sequential sample counts at which statistics are reported.
  std::vector<int> checkpoints = {10, 30, 50, 70, 90, 190};
  int jobs = 1;

  void validate() const;
};

/// Parses a batch config (JSON). Relative paths resolve against `base_dir`.
BatchConfig parse_batch_config(const std::string& json_text,
                               const std::filesystem::path& base_dir = {});
BatchConfig load_batch_config(const std::filesystem::path& path);

/// Parses "bands:DIM:COUNT" or "split:DIM:RAW_THRESHOLD".
FixedPartition parse_fixed_partition(const std::string& text, const SearchSpace& space);

/// Reads a search-space file: {"dims": [{"lower":..,"upper":..,"kind":..,"step":..}, ...]}.
SearchSpace load_space(const std::filesystem::path& path);
SearchSpace parse_space(const std::string& json_text);

struct SeedRun {
  std::uint64_t seed = 0;
  RunResult result;
  /// Non-empty when the run aborted.
  std::string error;
};

struct BatchResult {
  std::vector<std::string> variants;
  /// runs[v] holds one entry per seed, in seed-list order.
  std::vector<std::vector<SeedRun>> runs;
  Direction direction = Direction::maximize;
  std::optional<KnownOptimum> known;
  int pilot_size = 0;
  std::size_t dim = 0;

  std::size_t failed_runs() const;
};

/// Runs every variant on every seed. With shared_pilot, all variants of a
/// seed start from the same pilot points. When `out_dir` is given, the
/// config summary and one trace per run are written under it.
BatchResult run_batch(const BatchConfig& config,
                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Pilot stream seed for a variant (shared or per-variant).
std::uint64_t pilot_seed_for(std::uint64_t seed, const std::string& variant, bool shared_pilot);

void write_trace(const std::filesystem::path& path, const RunResult& result, std::size_t dim);
RunResult read_trace(const std::filesystem::path& path, Direction direction);

struct RunStats {
  double delta_argmax = 0.0;
  double delta_max = 0.0;
};

/// Distance of the best observed point to the known optimizer set, and the
/// gap between the known optimum and the best observed value, over the first
/// `evaluations` records (all by default). Empty without a known optimum or
/// without any successful evaluation.
std::optional<RunStats> compute_stats(const RunResult& result,
                                      const std::optional<KnownOptimum>& known,
                                      std::size_t evaluations = static_cast<std::size_t>(-1));

struct PairedComparison {
  double equal_or_better = 0.0;
  double strictly_better = 0.0;
  std::vector<double> baseline;
  std::vector<double> variant;
};

/// Per-seed comparison of optima. Throws ConfigError when seed sets differ.
PairedComparison paired_compare(const std::map<std::uint64_t, double>& baseline,
                                const std::map<std::uint64_t, double>& variant,
                                Direction direction);

/// Mean effective_k over runs, read at the record after `evaluations`
/// evaluations (the final record when the run is shorter).
double summarize_components(const std::vector<RunResult>& results, std::size_t evaluations);

/// Writes stats.csv, paired.csv and components.csv into `dir`, comparing
/// every variant against the first one.
void write_report(const BatchResult& batch, const std::vector<int>& checkpoints,
                  const std::filesystem::path& dir);

/// Reloads a bench output directory (batch.json + traces).
BatchResult load_batch_result(const std::filesystem::path& dir, std::vector<int>* checkpoints);

}  // namespace cgp
