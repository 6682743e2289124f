#include "cgp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgp/errors.hpp"

namespace cgp {

Eigen::MatrixXd Dataset::unit_matrix() const {
  if (obs_.empty()) return {};
  Eigen::MatrixXd X(static_cast<Eigen::Index>(obs_.size()),
                    static_cast<Eigen::Index>(obs_.front().unit.size()));
  for (std::size_t i = 0; i < obs_.size(); ++i)
    for (std::size_t j = 0; j < obs_[i].unit.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = obs_[i].unit[j];
  return X;
}

Eigen::VectorXd Dataset::responses() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(obs_.size()));
  for (std::size_t i = 0; i < obs_.size(); ++i) y[static_cast<Eigen::Index>(i)] = obs_[i].y;
  return y;
}

FixedPartition band_partition(std::size_t dim, int bands) {
  if (bands < 1) throw ConfigError("band partition needs at least one band");
  return {bands, [dim, bands](std::span<const double> u) {
            const int b = static_cast<int>(std::floor(u[dim] * bands));
            return std::clamp(b, 0, bands - 1);
          }};
}

FixedPartition threshold_partition(const SearchSpace& space, std::size_t dim, double threshold) {
  if (dim >= space.dim()) throw ConfigError("threshold partition dimension out of range");
  const double unit_cut = (threshold - space[dim].lower) / space[dim].width();
  return {2, [dim, unit_cut](std::span<const double> u) { return u[dim] < unit_cut ? 0 : 1; }};
}

int Classifier::classify(std::span<const double> unit) const {
  switch (kind_) {
    case Kind::constant:
      return 0;
    case Kind::knn:
      return knn_.classify(unit);
    case Kind::rule:
      return fixed_.rule(unit);
  }
  return 0;
}

std::vector<int> Classifier::classify_rows(const Eigen::MatrixXd& Q) const {
  if (kind_ == Kind::knn) return knn_.classify_rows(Q);
  std::vector<int> out(static_cast<std::size_t>(Q.rows()), 0);
  if (kind_ == Kind::constant) return out;
  Eigen::RowVectorXd row(Q.cols());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    row = Q.row(i);
    out[static_cast<std::size_t>(i)] =
        fixed_.rule(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

int CgpModel::effective_k() const {
  return static_cast<int>(std::count_if(components.begin(), components.end(),
                                        [](const auto& c) { return c.has_value(); }));
}

CgpPrediction predict_cgp(const CgpModel& model, std::span<const double> unit) {
  const int label = model.classifier.classify(unit);
  if (label < 0 || label >= model.label_count())
    throw DomainError("classifier produced a label outside the model");
  const auto& comp = model.components[static_cast<std::size_t>(label)];
  if (!comp) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, label};
  }
  const Prediction p = comp->predict(unit);
  return {p.mean, p.variance, label};
}

}  // namespace cgp
