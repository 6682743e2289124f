#include "cgp/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "cgp/errors.hpp"
#include "cgp/qmc.hpp"

namespace cgp {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;
constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = (X.row(i) - X.row(j)).norm();
      D(i, j) = r;
      D(j, i) = r;
    }
  }
  return D;
}

Eigen::MatrixXd kernel_from_distances(const KernelSpec& spec, const Eigen::MatrixXd& D) {
  return D.unaryExpr([&spec](double r) { return kernel_from_distance(spec, r); });
}

double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y,
                       Eigen::VectorXd* alpha_out) {
  // The quadratic form as |L^-1 y|^2: one triangular solve, so its rounding
  // error grows with cond(L) rather than cond(K).
  const Eigen::VectorXd z = llt.matrixL().solve(y);
  const auto& L = llt.matrixLLT();
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) log_det_half += std::log(L(i, i));
  const double n = static_cast<double>(y.size());
  const double value = -0.5 * z.squaredNorm() - log_det_half - 0.5 * n * kLog2Pi;
  if (alpha_out) *alpha_out = llt.matrixU().solve(z);
  return value;
}

// Minimizes `f` over the box [lo, hi] with Nelder-Mead; trial points are
// clipped into the box. Returns the best vertex, which is never worse than
// `start`.
template <typename F>
std::pair<Eigen::Vector3d, double> nelder_mead_box(F&& f, const Eigen::Vector3d& start,
                                                   const Eigen::Vector3d& lo,
                                                   const Eigen::Vector3d& hi, int max_evals) {
  constexpr int kN = 3;
  auto clip = [&](Eigen::Vector3d p) { return p.cwiseMax(lo).cwiseMin(hi); };

  std::array<Eigen::Vector3d, kN + 1> v;
  std::array<double, kN + 1> fv;
  v[0] = clip(start);
  fv[0] = f(v[0]);
  int evals = 1;
  for (int i = 0; i < kN; ++i) {
    Eigen::Vector3d p = v[0];
    const double step = 0.1 * (hi[i] - lo[i]);
    p[i] = (p[i] + step <= hi[i]) ? p[i] + step : p[i] - step;
    v[i + 1] = clip(p);
    fv[i + 1] = f(v[i + 1]);
    ++evals;
  }

  std::array<int, kN + 1> order{0, 1, 2, 3};
  while (evals < max_evals) {
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order[0];
    const int worst = order[kN];
    const int second_worst = order[kN - 1];

    double diameter = 0.0;
    for (int i = 1; i <= kN; ++i)
      diameter = std::max(diameter, (v[order[i]] - v[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(fv[worst]) && fv[worst] - fv[best] < 1e-8 && diameter < 1e-5) break;

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i = 0; i < kN; ++i) centroid += v[order[i]];
    centroid /= kN;

    const Eigen::Vector3d reflected = clip(centroid + (centroid - v[worst]));
    const double f_reflected = f(reflected);
    ++evals;
    if (f_reflected < fv[best]) {
      const Eigen::Vector3d expanded = clip(centroid + 2.0 * (centroid - v[worst]));
      const double f_expanded = f(expanded);
      ++evals;
      if (f_expanded < f_reflected) {
        v[worst] = expanded;
        fv[worst] = f_expanded;
      } else {
        v[worst] = reflected;
        fv[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < fv[second_worst]) {
      v[worst] = reflected;
      fv[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < fv[worst];
    const Eigen::Vector3d contracted =
        outside ? clip(centroid + 0.5 * (reflected - centroid))
                : clip(centroid + 0.5 * (v[worst] - centroid));
    const double f_contracted = f(contracted);
    ++evals;
    if (f_contracted < std::min(fv[worst], f_reflected)) {
      v[worst] = contracted;
      fv[worst] = f_contracted;
      continue;
    }
    for (int i = 1; i <= kN; ++i) {
      const int idx = order[i];
      v[idx] = clip(v[best] + 0.5 * (v[idx] - v[best]));
      fv[idx] = f(v[idx]);
      ++evals;
    }
  }
  int best = 0;
  for (int i = 1; i <= kN; ++i)
    if (fv[i] < fv[best]) best = i;
  return {v[best], fv[best]};
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::matern12:
      return "matern12";
    case KernelFamily::matern32:
      return "matern32";
    case KernelFamily::matern52:
      return "matern52";
    case KernelFamily::squared_exponential:
      return "sqexp";
  }
  return "matern32";
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "matern12" || s == "matern-1/2") return KernelFamily::matern12;
  if (s == "matern32" || s == "matern-3/2") return KernelFamily::matern32;
  if (s == "matern52" || s == "matern-5/2") return KernelFamily::matern52;
  if (s == "sqexp" || s == "rbf" || s == "squared-exponential") return KernelFamily::squared_exponential;
  throw ConfigError("unknown kernel '" + s + "' (matern12, matern32, matern52, sqexp)");
}

double kernel_from_distance(const KernelSpec& spec, double distance) {
  const double r = distance / spec.length_scale;
  switch (spec.family) {
    case KernelFamily::matern12:
      return spec.signal_variance * std::exp(-r);
    case KernelFamily::matern32:
      return spec.signal_variance * (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    case KernelFamily::matern52:
      return spec.signal_variance * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * std::exp(-kSqrt5 * r);
    case KernelFamily::squared_exponential:
      return spec.signal_variance * std::exp(-0.5 * r * r);
  }
  return 0.0;
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size()) throw DomainError("kernel_eval: points differ in dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = x1[i] - x2[i];
    s += d * d;
  }
  return kernel_from_distance(spec, std::sqrt(s));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  return kernel_from_distances(spec, pairwise_distances(X));
}

Eigen::MatrixXd cross_kernel(const KernelSpec& spec, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw DomainError("cross_kernel: point sets differ in dimension");
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      K(i, j) = kernel_from_distance(spec, (A.row(i) - B.row(j)).norm());
  return K;
}

double factorize_with_jitter(Eigen::MatrixXd& K, double noise_variance,
                             Eigen::LLT<Eigen::MatrixXd>& llt) {
  K.diagonal().array() += noise_variance;
  llt.compute(K);
  if (llt.info() == Eigen::Success) return 0.0;
  double applied = 0.0;
  for (double jitter = 1e-10; jitter <= 1e-4 * 1.0001; jitter *= 10.0) {
    K.diagonal().array() += jitter - applied;
    applied = jitter;
    llt.compute(K);
    if (llt.info() == Eigen::Success) return jitter;
  }
  throw NumericError("covariance matrix is not positive definite even with jitter 1e-4");
}

double log_marginal_likelihood(const KernelSpec& spec, double noise_variance,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& y_standardized) {
  if (X.rows() < 1 || X.rows() != y_standardized.size())
    throw DomainError("log_marginal_likelihood: need matching, non-empty X and y");
  Eigen::MatrixXd K = kernel_matrix(spec, X);
  Eigen::LLT<Eigen::MatrixXd> llt;
  factorize_with_jitter(K, noise_variance, llt);
  return lml_from_factor(llt, y_standardized, nullptr);
}

Standardization standardization_of(const Eigen::VectorXd& y) {
  Standardization s;
  const auto n = y.size();
  if (n == 0) return s;
  s.mean = y.mean();
  if (n >= 2) {
    const double var = (y.array() - s.mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * std::max(1.0, std::abs(s.mean))) s.sd = sd;
  }
  return s;
}

FittedComponent FittedComponent::with_parameters(Eigen::MatrixXd X, const Eigen::VectorXd& y_raw,
                                                 const KernelSpec& kernel, double noise_variance) {
  if (X.rows() < 1 || X.rows() != y_raw.size())
    throw DomainError("component needs a non-empty training set with one response per point");
  FittedComponent c;
  const Standardization st = standardization_of(y_raw);
  c.y_mean_ = st.mean;
  c.y_sd_ = st.sd;
  c.y_std_ = (y_raw.array() - st.mean) / st.sd;
  c.X_ = std::move(X);
  c.kernel_ = kernel;
  c.noise_ = noise_variance;
  Eigen::MatrixXd K = kernel_matrix(kernel, c.X_);
  c.jitter_ = factorize_with_jitter(K, noise_variance, c.llt_);
  c.log_likelihood_ = lml_from_factor(c.llt_, c.y_std_, &c.alpha_);
  return c;
}

Prediction FittedComponent::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != X_.cols())
    throw DomainError("predict: query dimension does not match training data");
  Eigen::VectorXd k(X_.rows());
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < X_.cols(); ++j) {
      const double d = X_(i, j) - x[static_cast<std::size_t>(j)];
      s += d * d;
    }
    k[i] = kernel_from_distance(kernel_, std::sqrt(s));
  }
  const double mean_std = k.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  const double var_std = std::max(0.0, kernel_.signal_variance - v.squaredNorm());
  return {y_mean_ + y_sd_ * mean_std, y_sd_ * y_sd_ * var_std};
}

void FittedComponent::predict_batch(const Eigen::MatrixXd& Q, Eigen::VectorXd& mean,
                                    Eigen::VectorXd& variance) const {
  const Eigen::MatrixXd Ks = cross_kernel(kernel_, X_, Q);  // n x m
  mean = (Ks.transpose() * alpha_).array() * y_sd_ + y_mean_;
  const Eigen::MatrixXd V = llt_.matrixL().solve(Ks);
  variance = (kernel_.signal_variance - V.colwise().squaredNorm().transpose().array())
                 .max(0.0) *
             (y_sd_ * y_sd_);
}

FittedComponent fit_component(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw,
                              KernelFamily family, const FitConfig& config, Rng& rng) {
  if (X.rows() < 1 || X.rows() != y_raw.size())
    throw DomainError("fit_component: need a non-empty training set with one response per point");

  const KernelSpec defaults{family, config.default_length, config.default_signal};
  const Eigen::MatrixXd D = pairwise_distances(X);
  const bool degenerate = X.rows() < 2 || D.maxCoeff() == 0.0;
  if (degenerate) {
    auto c = FittedComponent::with_parameters(X, y_raw, defaults, config.default_noise);
    c.mark_defaults();
    return c;
  }

  const Standardization st = standardization_of(y_raw);
  const Eigen::VectorXd y = (y_raw.array() - st.mean) / st.sd;

  const Eigen::Vector3d lo(config.log_length_min, config.log_signal_min, config.log_noise_min);
  const Eigen::Vector3d hi(config.log_length_max, config.log_signal_max, config.log_noise_max);

  Eigen::LLT<Eigen::MatrixXd> llt;
  auto negative_lml = [&](const Eigen::Vector3d& theta) {
    const KernelSpec spec{family, std::exp(theta[0]), std::exp(theta[1])};
    Eigen::MatrixXd K = kernel_from_distances(spec, D);
    try {
      factorize_with_jitter(K, std::exp(theta[2]), llt);
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
    const double v = -lml_from_factor(llt, y, nullptr);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  const int starts = std::max(1, config.starts);
  const Eigen::MatrixXd quasi = rotated_halton(static_cast<std::size_t>(starts - 1), 3, rng);

  Eigen::Vector3d best_theta(std::log(defaults.length_scale), std::log(defaults.signal_variance),
                             std::log(config.default_noise));
  double best_value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    Eigen::Vector3d start = best_theta;
    if (s == 0) {
      start = Eigen::Vector3d(std::log(defaults.length_scale), std::log(defaults.signal_variance),
                              std::log(config.default_noise));
    } else {
      for (int j = 0; j < 3; ++j) start[j] = lo[j] + quasi(s - 1, j) * (hi[j] - lo[j]);
    }
    auto [theta, value] = nelder_mead_box(negative_lml, start, lo, hi, config.max_evals_per_start);
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
  }

  if (!std::isfinite(best_value)) {
    auto c = FittedComponent::with_parameters(X, y_raw, defaults, config.default_noise);
    c.mark_defaults();
    return c;
  }
  const KernelSpec fitted{family, std::exp(best_theta[0]), std::exp(best_theta[1])};
  return FittedComponent::with_parameters(X, y_raw, fitted, std::exp(best_theta[2]));
}

}  // namespace cgp
