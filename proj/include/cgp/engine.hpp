#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cgp/acquisition.hpp"
#include "cgp/gp.hpp"
#include "cgp/model.hpp"
#include "cgp/objectives.hpp"
#include "cgp/partition.hpp"
#include "cgp/rng.hpp"
#include "cgp/space.hpp"

namespace cgp {

struct EngineConfig {
  ClusteringSpec clustering;
  int classifier_k = 3;
  KernelFamily kernel = KernelFamily::matern32;
  AcquisitionConfig acquisition;
  /// Probability that a sequential sample comes from acquisition
  /// maximization rather than uniform sampling.
  double exploration_rate = 0.8;
  int pilot_size = 10;
  int max_samples = 40;
  PartitionMode partition_mode = PartitionMode::learned;
  /// Used when partition_mode is fixed.
  FixedPartition fixed;
  FitConfig fit;
  /// Replace proposals that land on an already evaluated lattice point.
  bool avoid_duplicates = true;

  void validate() const;
};

std::string to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& s);

/// Cluster, prune, classify and fit one GP per surviving label.
/// Component fit failures fall back to default hyperparameters.
CgpModel fit_cgp(const Dataset& data, const EngineConfig& config, Rng& rng);

enum class StepSource { pilot, random, acquisition };
std::string to_string(StepSource source);
StepSource step_source_from_string(const std::string& s);

struct StepRecord {
  int step = 0;
  StepSource source = StepSource::pilot;
  Point raw;
  double y = 0.0;
  bool ok = true;
  /// Components in the most recently fitted model (0 before the first fit).
  int effective_k = 0;
  /// Component the proposal came from; -1 for pilot and random points.
  int component = -1;
  double seconds = 0.0;
  std::string error;
};

struct RunResult {
  Direction direction = Direction::maximize;
  std::vector<StepRecord> records;
  Point best_x;
  double best_y = 0.0;
  bool has_best = false;

  /// Recomputes the best point from the records.
  void update_best();
  /// Best successful observation among the first `evaluations` records.
  std::optional<std::pair<Point, double>> best_within(std::size_t evaluations) const;
};

/// Sequential optimizer with an ask/tell surface. One objective evaluation
/// per ask/tell pair.
///
/// All randomness derives from `seed`: step i uses the sub-stream
/// derive("step").derive(i), so a run is a prefix of any longer run with the
/// same seed. Pilot points come from `pilot_seed` so variants can share them.
class Optimizer {
 public:
  Optimizer(SearchSpace space, EngineConfig config, std::uint64_t seed);
  Optimizer(SearchSpace space, EngineConfig config, std::uint64_t seed, std::uint64_t pilot_seed);

  bool done() const noexcept;
  std::size_t evaluations() const noexcept { return result_.records.size(); }

  /// Next raw point to evaluate. Repeated calls without tell return the same
  /// point.
  Point ask();
  /// Records the response at the point last returned by ask().
  void tell(std::span<const double> raw, double y);
  /// Records a failed evaluation; the budget is consumed and the point is
  /// not added to the data.
  void tell_failure(std::span<const double> raw, std::string message);

  /// ask, evaluate, tell. EvaluationError from `objective` becomes a failed
  /// step.
  void step(const EvalFn& objective);

  const SearchSpace& space() const noexcept { return space_; }
  const EngineConfig& config() const noexcept { return config_; }
  const Dataset& dataset() const noexcept { return data_; }
  const RunResult& result() const noexcept { return result_; }
  const std::optional<CgpModel>& last_model() const noexcept { return model_; }

 private:
  struct Pending {
    Point raw;
    StepSource source = StepSource::pilot;
    int component = -1;
    std::chrono::steady_clock::time_point started;
  };

  void record(std::span<const double> raw, double y, bool ok, std::string error);

  SearchSpace space_;
  EngineConfig config_;
  Rng root_;
  std::vector<Point> pilot_units_;
  Dataset data_;
  RunResult result_;
  std::optional<CgpModel> model_;
  std::optional<Pending> pending_;
  std::set<Point> evaluated_;
};

/// Runs the full loop: pilot points, then exploration-gated steps until the
/// budget is spent.
RunResult optimize(const EvalFn& objective, const SearchSpace& space, const EngineConfig& config,
                   std::uint64_t seed);
RunResult optimize(const EvalFn& objective, const SearchSpace& space, const EngineConfig& config,
                   std::uint64_t seed, std::uint64_t pilot_seed);
RunResult optimize(const Objective& objective, EngineConfig config, std::uint64_t seed);

}  // namespace cgp
