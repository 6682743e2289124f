#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cgp/direction.hpp"
#include "cgp/gp.hpp"
#include "cgp/partition.hpp"
#include "cgp/space.hpp"

namespace cgp {

struct Observation {
  Point raw;
  Point unit;
  double y = 0.0;
  /// Component label from the most recent model fit; -1 if not yet labeled.
  int label = -1;
};

/// Ordered observations with their unit-cube coordinates.
class Dataset {
 public:
  void add(Observation obs) { obs_.push_back(std::move(obs)); }
  std::size_t size() const noexcept { return obs_.size(); }
  bool empty() const noexcept { return obs_.empty(); }
  const Observation& operator[](std::size_t i) const { return obs_[i]; }
  Observation& operator[](std::size_t i) { return obs_[i]; }
  auto begin() const { return obs_.begin(); }
  auto end() const { return obs_.end(); }

  /// Rows are unit points.
  Eigen::MatrixXd unit_matrix() const;
  Eigen::VectorXd responses() const;

 private:
  std::vector<Observation> obs_;
};

enum class PartitionMode { learned, fixed, single };

/// A user-supplied partition of the unit cube into `label_count` regions.
struct FixedPartition {
  int label_count = 1;
  std::function<int(std::span<const double> unit)> rule;
};

/// Splits unit dimension `dim` into `bands` equal intervals.
FixedPartition band_partition(std::size_t dim, int bands);
/// Two regions split at a raw threshold on one dimension: label 0 below the
/// threshold, label 1 at or above it.
FixedPartition threshold_partition(const SearchSpace& space, std::size_t dim, double threshold);

/// Maps unit points to component labels: a trained k-NN, a fixed rule, or
/// the constant single-component map.
class Classifier {
 public:
  Classifier() = default;
  explicit Classifier(KnnClassifier knn) : knn_(std::move(knn)), kind_(Kind::knn) {}
  explicit Classifier(FixedPartition fixed) : fixed_(std::move(fixed)), kind_(Kind::rule) {}

  int classify(std::span<const double> unit) const;
  std::vector<int> classify_rows(const Eigen::MatrixXd& Q) const;

 private:
  enum class Kind { constant, knn, rule };
  KnnClassifier knn_;
  FixedPartition fixed_;
  Kind kind_ = Kind::constant;
};

struct CgpPrediction {
  double mean = 0.0;
  double variance = 0.0;
  int label = 0;
};

/// Additive GP over a partition: one independent component per label.
struct CgpModel {
  std::size_t dim = 0;
  /// Indexed by label. Empty only for fixed-partition regions that hold no
  /// observations.
  std::vector<std::optional<FittedComponent>> components;
  Classifier classifier;
  Labeling labeling;
  /// Observations per label.
  std::vector<int> sizes;
  /// Best observed response per label in the optimization direction.
  std::vector<double> incumbents;
  /// Labels whose component fell back to default hyperparameters.
  std::vector<int> refit_with_defaults;

  int label_count() const noexcept { return static_cast<int>(components.size()); }
  /// Number of fitted components.
  int effective_k() const;
};

CgpPrediction predict_cgp(const CgpModel& model, std::span<const double> unit);

}  // namespace cgp
