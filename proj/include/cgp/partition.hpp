#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "cgp/rng.hpp"

namespace cgp {

enum class ClusterMethod { kmeans, dgm };

struct ClusteringSpec {
  ClusterMethod method = ClusterMethod::kmeans;
  /// k for k-means, maximum component count for DGM.
  int k = 3;
  /// Scale on the standardized response coordinate of the clustering features.
  double xi = 1.0;
  /// 0 selects max(2, d + 1).
  int min_cluster_size = 0;

  void validate() const;
  int effective_min_size(std::size_t dim) const;
};

/// Parses "kmeans:K" or "dgm:KMAX".
ClusteringSpec parse_clustering(const std::string& text);
std::string to_string(const ClusteringSpec& spec);

/// Cluster labels for the observations, compacted to 0..effective_k-1.
struct Labeling {
  std::vector<int> labels;
  int effective_k = 0;

  std::vector<int> sizes() const;
};

/// Relabels to first-appearance order 0..m-1 and sets effective_k.
Labeling compact(std::vector<int> labels);

/// Rows are (unit x, xi * standardized y), with y standardized over all rows.
Eigen::MatrixXd build_feature_pairs(const Eigen::MatrixXd& unit_x, const Eigen::VectorXd& y,
                                    double xi);

struct KmeansRun {
  Labeling labeling;
  double wcss = 0.0;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> wcss_trace;
};

/// One Lloyd run from k-means++ seeding.
KmeansRun kmeans_lloyd(const Eigen::MatrixXd& features, int k, Rng& rng, int max_iter = 100);

/// Best of `restarts` Lloyd runs by within-cluster sum of squares. k is
/// reduced to the number of rows when there are fewer rows than k.
Labeling cluster_kmeans(const Eigen::MatrixXd& features, int k, Rng& rng, int restarts = 5);

struct DgmOptions {
  int max_iter = 200;
  double tol = 1e-4;
  double reg_covar = 1e-6;
};

/// Truncated stick-breaking variational Gaussian mixture with full
/// covariances and weight concentration 1/k_max. Components whose
/// responsibility mass is below 1 are dropped; labels are the argmax
/// responsibility among the survivors.
Labeling cluster_dgm(const Eigen::MatrixXd& features, int k_max, Rng& rng,
                     const DgmOptions& options = {});

/// Dissolves clusters smaller than `min_size`, moving their members to the
/// nearest surviving centroid in feature space. Merges everything into one
/// cluster if nothing survives.
Labeling prune_small_clusters(const Labeling& labeling, const Eigen::MatrixXd& features,
                              int min_size);

/// k-nearest-neighbour vote in unit input coordinates.
///
/// Distance ties go to the lower training index. Vote ties go to whichever
/// tied label has the nearest member, so a two-way tie resolves to the
/// single nearest neighbour.
class KnnClassifier {
 public:
  KnnClassifier() = default;
  KnnClassifier(Eigen::MatrixXd train_x, std::vector<int> train_labels, int k_neighbors = 3);

  int classify(std::span<const double> x) const;
  std::vector<int> classify_rows(const Eigen::MatrixXd& Q) const;

  int k_neighbors() const noexcept { return k_; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  Eigen::MatrixXd x_;
  std::vector<int> labels_;
  int k_ = 3;
  int label_count_ = 0;
};

}  // namespace cgp
