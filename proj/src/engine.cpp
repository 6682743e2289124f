#include "cgp/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "cgp/errors.hpp"

namespace cgp {

void EngineConfig::validate() const {
  clustering.validate();
  acquisition.validate();
  if (classifier_k < 1) throw ConfigError("classifier k must be >= 1");
  if (!(exploration_rate >= 0.0 && exploration_rate <= 1.0))
    throw ConfigError("exploration rate must lie in [0, 1]");
  if (pilot_size < 1) throw ConfigError("pilot size must be >= 1");
  if (max_samples < pilot_size) throw ConfigError("budget must be at least the pilot size");
  if (partition_mode == PartitionMode::fixed && (!fixed.rule || fixed.label_count < 1))
    throw ConfigError("fixed partition mode needs a labeling rule");
}

std::string to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::learned:
      return "learned";
    case PartitionMode::fixed:
      return "fixed";
    case PartitionMode::single:
      return "single";
  }
  return "learned";
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "learned") return PartitionMode::learned;
  if (s == "fixed") return PartitionMode::fixed;
  if (s == "single") return PartitionMode::single;
  throw ConfigError("partition must be learned, single or fixed (got '" + s + "')");
}

std::string to_string(StepSource source) {
  switch (source) {
    case StepSource::pilot:
      return "pilot";
    case StepSource::random:
      return "random";
    case StepSource::acquisition:
      return "acquisition";
  }
  return "pilot";
}

StepSource step_source_from_string(const std::string& s) {
  if (s == "pilot") return StepSource::pilot;
  if (s == "random") return StepSource::random;
  if (s == "acquisition") return StepSource::acquisition;
  throw ConfigError("unknown step source '" + s + "'");
}

namespace {

FittedComponent fit_or_default(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const EngineConfig& config, Rng& rng, bool* used_defaults) {
  try {
    FittedComponent c = fit_component(X, y, config.kernel, config.fit, rng);
    *used_defaults = c.used_defaults();
    return c;
  } catch (const std::exception&) {
    *used_defaults = true;
  }
  const KernelSpec defaults{config.kernel, config.fit.default_length, config.fit.default_signal};
  try {
    FittedComponent c = FittedComponent::with_parameters(X, y, defaults, config.fit.default_noise);
    c.mark_defaults();
    return c;
  } catch (const NumericError&) {
    FittedComponent c = FittedComponent::with_parameters(X, y, defaults, 1e-2);
    c.mark_defaults();
    return c;
  }
}

}  // namespace

CgpModel fit_cgp(const Dataset& data, const EngineConfig& config, Rng& rng) {
  if (data.empty()) throw DomainError("fit_cgp: empty dataset");
  const Eigen::MatrixXd X = data.unit_matrix();
  const Eigen::VectorXd y = data.responses();
  const auto n = static_cast<std::size_t>(X.rows());

  CgpModel model;
  model.dim = static_cast<std::size_t>(X.cols());
  int label_count = 1;
  switch (config.partition_mode) {
    case PartitionMode::single:
      model.labeling = compact(std::vector<int>(n, 0));
      break;
    case PartitionMode::learned: {
      const Eigen::MatrixXd features = build_feature_pairs(X, y, config.clustering.xi);
      Rng cluster_rng = rng.derive("cluster");
      Labeling raw = config.clustering.method == ClusterMethod::kmeans
                         ? cluster_kmeans(features, config.clustering.k, cluster_rng)
                         : cluster_dgm(features, config.clustering.k, cluster_rng);
      model.labeling = prune_small_clusters(
          raw, features, config.clustering.effective_min_size(model.dim));
      label_count = model.labeling.effective_k;
      if (label_count > 1)
        model.classifier = Classifier(KnnClassifier(X, model.labeling.labels, config.classifier_k));
      break;
    }
    case PartitionMode::fixed: {
      label_count = config.fixed.label_count;
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = config.fixed.rule(data[i].unit);
        if (labels[i] < 0 || labels[i] >= label_count)
          throw DomainError("fixed partition rule returned a label outside [0, label_count)");
      }
      model.labeling.labels = std::move(labels);
      model.labeling.effective_k = label_count;
      model.classifier = Classifier(config.fixed);
      break;
    }
  }

  model.components.resize(static_cast<std::size_t>(label_count));
  model.sizes.assign(static_cast<std::size_t>(label_count), 0);
  const double worst = config.acquisition.direction == Direction::maximize
                           ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
  model.incumbents.assign(static_cast<std::size_t>(label_count), worst);

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(label_count));
  for (std::size_t i = 0; i < n; ++i)
    members[static_cast<std::size_t>(model.labeling.labels[i])].push_back(static_cast<Eigen::Index>(i));

  Rng fit_rng = rng.derive("fit");
  for (int j = 0; j < label_count; ++j) {
    const auto& idx = members[static_cast<std::size_t>(j)];
    model.sizes[static_cast<std::size_t>(j)] = static_cast<int>(idx.size());
    if (idx.empty()) continue;
    Eigen::MatrixXd Xj(static_cast<Eigen::Index>(idx.size()), X.cols());
    Eigen::VectorXd yj(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Xj.row(static_cast<Eigen::Index>(r)) = X.row(idx[r]);
      yj[static_cast<Eigen::Index>(r)] = y[idx[r]];
      if (better(y[idx[r]], model.incumbents[static_cast<std::size_t>(j)], config.acquisition.direction))
        model.incumbents[static_cast<std::size_t>(j)] = y[idx[r]];
    }
    Rng component_rng = fit_rng.derive(static_cast<std::uint64_t>(j));
    bool defaults = false;
    model.components[static_cast<std::size_t>(j)] = fit_or_default(Xj, yj, config, component_rng, &defaults);
    if (defaults) model.refit_with_defaults.push_back(j);
  }
  if (model.labeling.effective_k == 0) model.labeling.effective_k = label_count;
  if (config.partition_mode == PartitionMode::fixed) model.labeling.effective_k = model.effective_k();
  return model;
}

void RunResult::update_best() {
  has_best = false;
  for (const auto& r : records) {
    if (!r.ok) continue;
    if (!has_best || better(r.y, best_y, direction)) {
      best_y = r.y;
      best_x = r.raw;
      has_best = true;
    }
  }
}

std::optional<std::pair<Point, double>> RunResult::best_within(std::size_t evaluations) const {
  std::optional<std::pair<Point, double>> best;
  const std::size_t n = std::min(evaluations, records.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (!r.ok) continue;
    if (!best || better(r.y, best->second, direction)) best = std::make_pair(r.raw, r.y);
  }
  return best;
}

Optimizer::Optimizer(SearchSpace space, EngineConfig config, std::uint64_t seed)
    : Optimizer(std::move(space), std::move(config), seed, seed) {}

Optimizer::Optimizer(SearchSpace space, EngineConfig config, std::uint64_t seed,
                     std::uint64_t pilot_seed)
    : space_(std::move(space)), config_(std::move(config)), root_(seed) {
  config_.validate();
  result_.direction = config_.acquisition.direction;
  Rng pilot = Rng(pilot_seed).derive("pilot");
  for (int i = 0; i < config_.pilot_size; ++i) pilot_units_.push_back(space_.random_unit_point(pilot));
}

bool Optimizer::done() const noexcept {
  return result_.records.size() >= static_cast<std::size_t>(config_.max_samples);
}

Point Optimizer::ask() {
  if (pending_) return pending_->raw;
  if (done()) throw DomainError("evaluation budget exhausted");

  const std::size_t i = result_.records.size();
  Pending p;
  p.started = std::chrono::steady_clock::now();
  if (i < pilot_units_.size()) {
    p.source = StepSource::pilot;
    p.raw = space_.denormalize(pilot_units_[i]);
    pending_ = std::move(p);
    return pending_->raw;
  }

  Rng step_rng = root_.derive("step").derive(static_cast<std::uint64_t>(i));
  const double u = step_rng.derive("explore").uniform();
  if (u <= config_.exploration_rate && data_.size() >= 2) {
    Rng model_rng = step_rng.derive("model");
    model_ = fit_cgp(data_, config_, model_rng);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k].label = model_->labeling.labels[k];

    CandidateFilter reject;
    if (config_.avoid_duplicates && !evaluated_.empty()) {
      reject = [this](std::span<const double> unit) {
        return evaluated_.count(space_.denormalize(unit)) > 0;
      };
    }
    Rng acq_rng = step_rng.derive("acquire");
    const Proposal prop = propose_next(*model_, config_.acquisition, acq_rng, reject);
    p.source = prop.fallback ? StepSource::random : StepSource::acquisition;
    p.component = prop.fallback ? -1 : prop.component;
    p.raw = space_.denormalize(prop.unit);
  } else {
    Rng random_rng = step_rng.derive("random");
    p.source = StepSource::random;
    p.raw = space_.denormalize(space_.random_unit_point(random_rng));
  }
  pending_ = std::move(p);
  return pending_->raw;
}

void Optimizer::record(std::span<const double> raw, double y, bool ok, std::string error) {
  if (done()) throw DomainError("evaluation budget exhausted");
  Point x(raw.begin(), raw.end());
  const Point unit = space_.normalize(x);

  StepRecord rec;
  rec.step = static_cast<int>(result_.records.size());
  rec.raw = x;
  rec.y = y;
  rec.ok = ok;
  rec.error = std::move(error);
  rec.effective_k = model_ ? model_->effective_k() : 0;
  if (pending_ && pending_->raw == x) {
    rec.source = pending_->source;
    rec.component = pending_->component;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - pending_->started).count();
  } else {
    rec.source = StepSource::random;
  }
  pending_.reset();

  evaluated_.insert(x);
  if (ok) {
    data_.add(Observation{x, unit, y, rec.component});
    if (!result_.has_best || better(y, result_.best_y, result_.direction)) {
      result_.best_y = y;
      result_.best_x = x;
      result_.has_best = true;
    }
  }
  result_.records.push_back(std::move(rec));
}

void Optimizer::tell(std::span<const double> raw, double y) {
  if (!std::isfinite(y)) {
    record(raw, std::numeric_limits<double>::quiet_NaN(), false, "non-finite response");
    return;
  }
  record(raw, y, true, {});
}

void Optimizer::tell_failure(std::span<const double> raw, std::string message) {
  record(raw, std::numeric_limits<double>::quiet_NaN(), false, std::move(message));
}

void Optimizer::step(const EvalFn& objective) {
  const Point x = ask();
  double y = 0.0;
  try {
    y = objective(x);
  } catch (const EvaluationError& e) {
    tell_failure(x, e.what());
    return;
  }
  tell(x, y);
}

RunResult optimize(const EvalFn& objective, const SearchSpace& space, const EngineConfig& config,
                   std::uint64_t seed, std::uint64_t pilot_seed) {
  Optimizer opt(space, config, seed, pilot_seed);
  while (!opt.done()) opt.step(objective);
  return opt.result();
}

RunResult optimize(const EvalFn& objective, const SearchSpace& space, const EngineConfig& config,
                   std::uint64_t seed) {
  return optimize(objective, space, config, seed, seed);
}

RunResult optimize(const Objective& objective, EngineConfig config, std::uint64_t seed) {
  config.acquisition.direction = objective.direction;
  return optimize(objective.fn, objective.space, config, seed, seed);
}

}  // namespace cgp
