#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <span>
#include <string>

#include "cgp/rng.hpp"

namespace cgp {

enum class KernelFamily { matern12, matern32, matern52, squared_exponential };

/// Isotropic stationary kernel.
struct KernelSpec {
  KernelFamily family = KernelFamily::matern32;
  double length_scale = 0.2;
  double signal_variance = 1.0;
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& s);

/// Covariance as a function of Euclidean distance.
double kernel_from_distance(const KernelSpec& spec, double distance);
/// Throws DomainError on a dimension mismatch.
double kernel_eval(const KernelSpec& spec, std::span<const double> x1, std::span<const double> x2);

/// Rows of `X` are points.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);
Eigen::MatrixXd cross_kernel(const KernelSpec& spec, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& B);

/// log N(y | 0, K + noise I). Throws NumericError when the matrix cannot be
/// factorized even with the maximum jitter.
double log_marginal_likelihood(const KernelSpec& spec, double noise_variance,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& y_standardized);

/// Hyperparameter search box (natural log of each parameter) and start policy.
struct FitConfig {
  double log_length_min = -4.605170185988091;  // log 0.01
  double log_length_max = 2.302585092994046;   // log 10
  double log_signal_min = -6.907755278982137;  // log 1e-3
  double log_signal_max = 6.907755278982137;   // log 1e3
  double log_noise_min = -18.420680743952367;  // log 1e-8
  double log_noise_max = 0.0;                  // log 1
  int starts = 5;
  int max_evals_per_start = 120;
  double default_length = 0.2;
  double default_signal = 1.0;
  double default_noise = 1e-4;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// One Gaussian process fitted to a fixed training set. Responses are
/// standardized within the component; predictions are reported in raw units.
class FittedComponent {
 public:
  /// Builds the component with the given hyperparameters (no search).
  static FittedComponent with_parameters(Eigen::MatrixXd X, const Eigen::VectorXd& y_raw,
                                         const KernelSpec& kernel, double noise_variance);

  Prediction predict(std::span<const double> x) const;
  /// Batch prediction; rows of `Q` are query points.
  void predict_batch(const Eigen::MatrixXd& Q, Eigen::VectorXd& mean,
                     Eigen::VectorXd& variance) const;

  const KernelSpec& kernel() const noexcept { return kernel_; }
  double noise_variance() const noexcept { return noise_; }
  double jitter() const noexcept { return jitter_; }
  double y_mean() const noexcept { return y_mean_; }
  double y_sd() const noexcept { return y_sd_; }
  double log_likelihood() const noexcept { return log_likelihood_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(X_.rows()); }
  const Eigen::MatrixXd& train_x() const noexcept { return X_; }
  const Eigen::VectorXd& train_y_standardized() const noexcept { return y_std_; }

  /// Fitted with prior defaults rather than by likelihood search (all inputs
  /// identical, or the search failed).
  bool used_defaults() const noexcept { return used_defaults_; }
  void mark_defaults() noexcept { used_defaults_ = true; }

 private:
  FittedComponent() = default;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_std_;
  double y_mean_ = 0.0;
  double y_sd_ = 1.0;
  KernelSpec kernel_;
  double noise_ = 0.0;
  double jitter_ = 0.0;
  double log_likelihood_ = 0.0;
  bool used_defaults_ = false;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// Mean/sd standardization; sd falls back to 1 for constant or single
/// responses.
struct Standardization {
  double mean = 0.0;
  double sd = 1.0;
};
Standardization standardization_of(const Eigen::VectorXd& y);

/// Maximum-likelihood fit of (length scale, signal variance, noise variance)
/// by multi-start bounded Nelder-Mead in log space. The first start is the
/// default triple; the rest are quasi-random points of the box.
FittedComponent fit_component(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw,
                              KernelFamily family, const FitConfig& config, Rng& rng);

/// Factorizes K + noise I, escalating diagonal jitter 1e-10 .. 1e-4 on
/// failure. Returns the jitter that was needed.
double factorize_with_jitter(Eigen::MatrixXd& K, double noise_variance,
                             Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace cgp
