#include "cgp/partition.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "cgp/errors.hpp"
#include "cgp/gp.hpp"

namespace cgp {

void ClusteringSpec::validate() const {
  if (k < 1) throw ConfigError("clustering k must be >= 1");
  if (!(xi >= 0.0)) throw ConfigError("xi must be >= 0");
  if (min_cluster_size < 0) throw ConfigError("min_cluster_size must be >= 0");
}

int ClusteringSpec::effective_min_size(std::size_t dim) const {
  if (min_cluster_size > 0) return min_cluster_size;
  return std::max(2, static_cast<int>(dim) + 1);
}

ClusteringSpec parse_clustering(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  ClusteringSpec spec;
  if (name == "kmeans")
    spec.method = ClusterMethod::kmeans;
  else if (name == "dgm")
    spec.method = ClusterMethod::dgm;
  else
    throw ConfigError("clustering must be kmeans:K or dgm:KMAX (got '" + text + "')");
  if (colon != std::string::npos) {
    try {
      spec.k = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad cluster count in '" + text + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string to_string(const ClusteringSpec& spec) {
  return (spec.method == ClusterMethod::kmeans ? "kmeans:" : "dgm:") + std::to_string(spec.k);
}

std::vector<int> Labeling::sizes() const {
  std::vector<int> s(static_cast<std::size_t>(effective_k), 0);
  for (int l : labels) ++s[static_cast<std::size_t>(l)];
  return s;
}

Labeling compact(std::vector<int> labels) {
  std::unordered_map<int, int> remap;
  for (int& l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  Labeling out;
  out.effective_k = static_cast<int>(remap.size());
  out.labels = std::move(labels);
  return out;
}

Eigen::MatrixXd build_feature_pairs(const Eigen::MatrixXd& unit_x, const Eigen::VectorXd& y,
                                    double xi) {
  if (unit_x.rows() != y.size() || unit_x.rows() == 0)
    throw DomainError("build_feature_pairs: need one response per point and at least one point");
  const Standardization st = standardization_of(y);
  Eigen::MatrixXd f(unit_x.rows(), unit_x.cols() + 1);
  f.leftCols(unit_x.cols()) = unit_x;
  f.col(unit_x.cols()) = xi * ((y.array() - st.mean) / st.sd).matrix();
  return f;
}

namespace {

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::RowVectorXd& x, double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

double wcss_of(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centers,
               const std::vector<int>& assign) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    s += (X.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

}  // namespace

KmeansRun kmeans_lloyd(const Eigen::MatrixXd& X, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw DomainError("kmeans: no data");
  k = std::clamp(k, 1, static_cast<int>(n));

  // k-means++ seeding
  Eigen::MatrixXd centers(k, X.cols());
  centers.row(0) = X.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (X.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centers.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (X.row(i) - centers.row(c)).squaredNorm());
  }

  KmeansRun run;
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_center(centers, X.row(i), nullptr);
      if (c != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    run.wcss_trace.push_back(wcss_of(X, centers, assign));
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  run.wcss = wcss_of(X, centers, assign);
  run.labeling = compact(std::move(assign));
  return run;
}

Labeling cluster_kmeans(const Eigen::MatrixXd& features, int k, Rng& rng, int restarts) {
  if (k < 1) throw DomainError("kmeans: k must be >= 1");
  KmeansRun best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(r));
    KmeansRun run = kmeans_lloyd(features, k, sub);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best.labeling;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

namespace {

struct VbFit {
  Eigen::MatrixXd log_resp;
  Eigen::VectorXd nk;
  double lower_bound = -std::numeric_limits<double>::infinity();
};

// Coordinate ascent for the truncated stick-breaking mixture, started from
// hard assignments `init` (labels in 0..K-1).
VbFit vb_mixture(const Eigen::MatrixXd& X, int K, const std::vector<int>& init,
                 const DgmOptions& options) {
  using boost::math::digamma;
  const Eigen::Index n = X.rows();
  const Eigen::Index D = X.cols();
  const double Dd = static_cast<double>(D);

  const double gamma = 1.0 / K;
  const double beta0 = 1.0;
  const double nu0 = Dd;
  const Eigen::RowVectorXd m0 = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - m0;
  Eigen::MatrixXd psi0 = centered.transpose() * centered / static_cast<double>(n - 1);
  psi0.diagonal().array() += options.reg_covar;

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, init[static_cast<std::size_t>(i)]) = 1.0;

  constexpr double kEps = 10.0 * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd nk(K), beta(K), nu(K), alpha1(K), alpha2(K);
  Eigen::MatrixXd means(K, D);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> cov_chol(static_cast<std::size_t>(K));

  auto m_step = [&]() {
    nk = resp.colwise().sum().transpose().array() + kEps;
    for (int k = 0; k < K; ++k) {
      const Eigen::RowVectorXd xk = (resp.col(k).transpose() * X) / nk[k];
      Eigen::MatrixXd Sk = Eigen::MatrixXd::Zero(D, D);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd diff = X.row(i) - xk;
        Sk.noalias() += resp(i, k) * diff.transpose() * diff;
      }
      Sk /= nk[k];
      Sk.diagonal().array() += options.reg_covar;

      beta[k] = beta0 + nk[k];
      means.row(k) = (beta0 * m0 + nk[k] * xk) / beta[k];
      nu[k] = nu0 + nk[k];
      const Eigen::RowVectorXd dm = xk - m0;
      Eigen::MatrixXd cov = psi0 + nk[k] * Sk + (nk[k] * beta0 / beta[k]) * dm.transpose() * dm;
      cov /= nu[k];
      cov_chol[static_cast<std::size_t>(k)].compute(cov);
    }
    double tail = 0.0;
    for (int k = K - 1; k >= 0; --k) {
      alpha1[k] = 1.0 + nk[k];
      alpha2[k] = gamma + tail;
      tail += nk[k];
    }
  };

  // Half log-determinant of each component's precision Cholesky factor.
  auto log_det_prec_half = [&](int k) {
    const auto& L = cov_chol[static_cast<std::size_t>(k)].matrixLLT();
    double v = 0.0;
    for (Eigen::Index j = 0; j < D; ++j) v -= std::log(L(j, j));
    return v;
  };

  Eigen::MatrixXd log_resp(n, K);
  auto e_step = [&]() {
    Eigen::VectorXd log_weight(K);
    double cumulative = 0.0;
    for (int k = 0; k < K; ++k) {
      const double dsum = digamma(alpha1[k] + alpha2[k]);
      log_weight[k] = digamma(alpha1[k]) - dsum + cumulative;
      cumulative += digamma(alpha2[k]) - dsum;
    }
    Eigen::MatrixXd weighted(n, K);
    for (int k = 0; k < K; ++k) {
      const auto& llt = cov_chol[static_cast<std::size_t>(k)];
      double log_lambda = Dd * std::log(2.0);
      for (Eigen::Index j = 0; j < D; ++j) log_lambda += digamma(0.5 * (nu[k] - static_cast<double>(j)));
      const Eigen::MatrixXd diff = (X.rowwise() - means.row(k)).transpose();  // D x n
      const Eigen::MatrixXd z = llt.matrixL().solve(diff);
      const Eigen::VectorXd maha = z.colwise().squaredNorm().transpose();
      const double constant = -0.5 * Dd * std::log(2.0 * std::numbers::pi) + log_det_prec_half(k) -
                              0.5 * Dd * std::log(nu[k]) + 0.5 * (log_lambda - Dd / beta[k]) +
                              log_weight[k];
      weighted.col(k) = (-0.5 * maha).array() + constant;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = log_sum_exp(weighted.row(i).transpose());
      log_resp.row(i) = weighted.row(i).array() - norm;
    }
  };

  // Variational lower bound up to a constant shared by all fits with the same
  // K and data.
  auto lower_bound = [&]() {
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) {
        const double lr = log_resp(i, k);
        if (std::isfinite(lr)) entropy -= std::exp(lr) * lr;
      }
    double log_wishart = 0.0, log_norm_weight = 0.0, log_mean_prec = 0.0;
    for (int k = 0; k < K; ++k) {
      const double ldc = log_det_prec_half(k) - 0.5 * Dd * std::log(nu[k]);
      double lg = 0.0;
      for (Eigen::Index j = 0; j < D; ++j) lg += std::lgamma(0.5 * (nu[k] - static_cast<double>(j)));
      log_wishart += -(nu[k] * ldc + nu[k] * Dd * 0.5 * std::log(2.0) + lg);
      log_norm_weight -= std::lgamma(alpha1[k]) + std::lgamma(alpha2[k]) - std::lgamma(alpha1[k] + alpha2[k]);
      log_mean_prec += std::log(beta[k]);
    }
    return entropy - log_wishart - log_norm_weight - 0.5 * Dd * log_mean_prec;
  };

  m_step();
  VbFit fit;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const double previous = fit.lower_bound;
    e_step();
    resp = log_resp.array().exp();
    m_step();
    fit.lower_bound = lower_bound();
    if (std::abs(fit.lower_bound - previous) < options.tol) break;
  }
  e_step();
  fit.log_resp = log_resp;
  fit.nk = nk;
  return fit;
}

}  // namespace

Labeling cluster_dgm(const Eigen::MatrixXd& X, int k_max, Rng& rng, const DgmOptions& options) {
  const Eigen::Index n = X.rows();
  if (k_max < 1) throw DomainError("dgm: k_max must be >= 1");
  if (n < 2 || k_max == 1) return compact(std::vector<int>(static_cast<std::size_t>(n), 0));
  const int K = std::min<int>(k_max, static_cast<int>(n));

  // One fit per initial cluster count j = 1..K (k-means with j clusters);
  // keep the fit with the largest lower bound. A single start rarely empties
  // a component that begins with data.
  std::optional<VbFit> best;
  for (int j = 1; j <= K; ++j) {
    std::vector<int> init(static_cast<std::size_t>(n), 0);
    if (j > 1) {
      Rng sub = rng.derive("dgm-init").derive(static_cast<std::uint64_t>(j));
      init = kmeans_lloyd(X, j, sub).labeling.labels;
    }
    VbFit fit = vb_mixture(X, K, init, options);
    if (!best || fit.lower_bound > best->lower_bound) best = std::move(fit);
  }

  std::vector<int> survivors;
  for (int k = 0; k < K; ++k)
    if (best->nk[k] >= 1.0) survivors.push_back(k);
  if (survivors.empty()) return compact(std::vector<int>(static_cast<std::size_t>(n), 0));

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int top = survivors.front();
    for (int k : survivors)
      if (best->log_resp(i, k) > best->log_resp(i, top)) top = k;
    labels[static_cast<std::size_t>(i)] = top;
  }
  return compact(std::move(labels));
}

Labeling prune_small_clusters(const Labeling& labeling, const Eigen::MatrixXd& features,
                              int min_size) {
  const auto sizes = labeling.sizes();
  std::vector<int> surviving;
  for (int l = 0; l < labeling.effective_k; ++l)
    if (sizes[static_cast<std::size_t>(l)] >= min_size) surviving.push_back(l);
  if (static_cast<int>(surviving.size()) == labeling.effective_k) return labeling;
  if (surviving.empty()) return compact(std::vector<int>(labeling.labels.size(), 0));

  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(surviving.size()),
                                                    features.cols());
  for (std::size_t s = 0; s < surviving.size(); ++s) {
    for (std::size_t i = 0; i < labeling.labels.size(); ++i)
      if (labeling.labels[i] == surviving[s])
        centroids.row(static_cast<Eigen::Index>(s)) += features.row(static_cast<Eigen::Index>(i));
    centroids.row(static_cast<Eigen::Index>(s)) /= sizes[static_cast<std::size_t>(surviving[s])];
  }
  std::vector<int> labels = labeling.labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (sizes[static_cast<std::size_t>(labels[i])] >= min_size) continue;
    const int c = nearest_center(centroids, features.row(static_cast<Eigen::Index>(i)), nullptr);
    labels[i] = surviving[static_cast<std::size_t>(c)];
  }
  return compact(std::move(labels));
}

KnnClassifier::KnnClassifier(Eigen::MatrixXd train_x, std::vector<int> train_labels,
                             int k_neighbors)
    : x_(std::move(train_x)), labels_(std::move(train_labels)), k_(k_neighbors) {
  if (labels_.empty() || static_cast<Eigen::Index>(labels_.size()) != x_.rows())
    throw DomainError("classifier needs one label per training point and at least one point");
  if (k_ < 1) throw DomainError("k_neighbors must be >= 1");
  k_ = std::min<int>(k_, static_cast<int>(labels_.size()));
  label_count_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
}

int KnnClassifier::classify(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != x_.cols())
    throw DomainError("classify: query dimension does not match training data");
  const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
  const std::size_t n = labels_.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = {(x_.row(static_cast<Eigen::Index>(i)) - q).squaredNorm(), i};
  const auto k = static_cast<std::size_t>(k_);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<int> votes(static_cast<std::size_t>(label_count_), 0);
  int top = 0;
  for (std::size_t j = 0; j < k; ++j) top = std::max(top, ++votes[static_cast<std::size_t>(labels_[dist[j].second])]);
  for (std::size_t j = 0; j < k; ++j) {
    const int label = labels_[dist[j].second];
    if (votes[static_cast<std::size_t>(label)] == top) return label;
  }
  return labels_[dist[0].second];
}

std::vector<int> KnnClassifier::classify_rows(const Eigen::MatrixXd& Q) const {
  std::vector<int> out(static_cast<std::size_t>(Q.rows()));
  Eigen::RowVectorXd row(Q.cols());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    row = Q.row(i);
    out[static_cast<std::size_t>(i)] = classify(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

}  // namespace cgp
