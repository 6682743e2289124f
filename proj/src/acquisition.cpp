#include "cgp/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgp/errors.hpp"
#include "cgp/qmc.hpp"

namespace cgp {

void AcquisitionConfig::validate() const {
  if (candidate_count < 1) throw ConfigError("candidate_count must be >= 1");
  if (!(boundary_weight >= 0.0)) throw ConfigError("boundary_weight must be >= 0");
}

double standard_normal_pdf(double z) { return 0.3989422804014327 * std::exp(-0.5 * z * z); }

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

double expected_improvement(double mean, double sd, double incumbent, Direction direction) {
  const double gain = direction == Direction::maximize ? mean - incumbent : incumbent - mean;
  if (!(sd > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sd;
  return std::max(0.0, sd * (z * standard_normal_cdf(z) + standard_normal_pdf(z)));
}

std::vector<double> boundary_bonus(const Eigen::MatrixXd& pool, const std::vector<int>& labels,
                                   int component, double weight) {
  const auto m = static_cast<std::size_t>(pool.rows());
  std::vector<double> bonus(m, 0.0);
  if (weight == 0.0) return bonus;
  std::vector<double> d_b(m, std::numeric_limits<double>::infinity());
  bool has_other = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] != component) {
      has_other = true;
      continue;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (labels[j] == component) continue;
      d_b[i] = std::min(d_b[i], (pool.row(static_cast<Eigen::Index>(i)) -
                                 pool.row(static_cast<Eigen::Index>(j)))
                                    .norm());
    }
  }
  if (!has_other) return bonus;
  double d_max = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (labels[i] == component) d_max = std::max(d_max, d_b[i]);
  if (!(d_max > 0.0)) return bonus;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] != component) continue;
    const double r = d_b[i] / d_max;
    bonus[i] = weight * (1.0 - r * r);
  }
  return bonus;
}

double boundary_bonus(std::span<const double> x, int component, const Classifier& classifier,
                      double weight, const Eigen::MatrixXd& probe_set) {
  if (weight == 0.0) return 0.0;
  Eigen::MatrixXd pool(probe_set.rows() + 1, probe_set.cols());
  pool.topRows(probe_set.rows()) = probe_set;
  for (Eigen::Index j = 0; j < pool.cols(); ++j) pool(probe_set.rows(), j) = x[static_cast<std::size_t>(j)];
  std::vector<int> labels = classifier.classify_rows(probe_set);
  labels.push_back(component);
  return boundary_bonus(pool, labels, component, weight).back();
}

Proposal propose_from_pool(const CgpModel& model, const AcquisitionConfig& config,
                           const Eigen::MatrixXd& pool, const CandidateFilter& reject) {
  const std::vector<int> labels = model.classifier.classify_rows(pool);
  const auto m = static_cast<std::size_t>(pool.rows());
  auto row_point = [&](std::size_t i) {
    Point p(static_cast<std::size_t>(pool.cols()));
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = pool(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return p;
  };

  std::vector<char> admissible(m, 1);
  if (reject)
    for (std::size_t i = 0; i < m; ++i) admissible[i] = reject(row_point(i)) ? 0 : 1;

  // An unobserved region has weight EI / 0.
  for (std::size_t i = 0; i < m; ++i) {
    const int l = labels[i];
    if (!admissible[i]) continue;
    if (l < 0 || l >= model.label_count())
      throw DomainError("classifier produced a label outside the model");
    if (!model.components[static_cast<std::size_t>(l)])
      return Proposal{row_point(i), l, std::numeric_limits<double>::infinity(), false};
  }

  Proposal best;
  best.fallback = true;
  double best_weighted = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < model.label_count(); ++j) {
    const auto& comp = model.components[static_cast<std::size_t>(j)];
    if (!comp) continue;
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < m; ++i)
      if (labels[i] == j && admissible[i]) idx.push_back(static_cast<Eigen::Index>(i));
    if (idx.empty()) continue;

    Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), pool.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = pool.row(idx[r]);
    Eigen::VectorXd mean, var;
    comp->predict_batch(sub, mean, var);
    std::vector<double> ei(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
      ei[r] = expected_improvement(mean[static_cast<Eigen::Index>(r)],
                                   std::sqrt(var[static_cast<Eigen::Index>(r)]),
                                   model.incumbents[static_cast<std::size_t>(j)], config.direction);

    std::size_t arg = 0;
    if (config.boundary_weight > 0.0) {
      const auto bonus = boundary_bonus(pool, labels, j, config.boundary_weight);
      const auto [lo, hi] = std::minmax_element(ei.begin(), ei.end());
      const double range = *hi - *lo;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double normalized = range > 0.0 ? (ei[r] - *lo) / range : 0.0;
        const double score = normalized + bonus[static_cast<std::size_t>(idx[r])];
        if (score > best_score) {
          best_score = score;
          arg = r;
        }
      }
    } else {
      arg = static_cast<std::size_t>(std::max_element(ei.begin(), ei.end()) - ei.begin());
    }

    const double weighted = ei[arg] / model.sizes[static_cast<std::size_t>(j)];
    if (weighted > best_weighted) {
      best_weighted = weighted;
      best = Proposal{row_point(static_cast<std::size_t>(idx[arg])), j, weighted, false};
    }
  }
  return best;
}

Proposal propose_next(const CgpModel& model, const AcquisitionConfig& config, Rng& rng,
                      const CandidateFilter& reject) {
  if (model.dim == 0) throw DomainError("propose_next: model has no dimension");
  Rng pool_rng = rng.derive("pool");
  const Eigen::MatrixXd pool =
      rotated_halton(static_cast<std::size_t>(config.candidate_count), model.dim, pool_rng);
  Proposal p = propose_from_pool(model, config, pool, reject);
  if (p.fallback) {
    Rng fallback = rng.derive("fallback");
    p.unit.resize(model.dim);
    for (auto& c : p.unit) c = fallback.uniform();
    p.component = model.classifier.classify(p.unit);
    p.weighted_ei = 0.0;
  }
  return p;
}

}  // namespace cgp
