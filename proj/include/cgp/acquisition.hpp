#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "cgp/direction.hpp"
#include "cgp/model.hpp"
#include "cgp/rng.hpp"

namespace cgp {

struct AcquisitionConfig {
  Direction direction = Direction::maximize;
  int candidate_count = 2048;
  /// Weight of the boundary bonus; 0 disables it.
  double boundary_weight = 0.0;

  void validate() const;
};

double standard_normal_pdf(double z);
double standard_normal_cdf(double z);

/// Closed-form expected improvement over `incumbent`; never negative.
double expected_improvement(double mean, double sd, double incumbent, Direction direction);

/// Bonus for every pool point labeled `component`: w * (1 - (d_b / d_max)^2),
/// where d_b is the distance to the nearest pool point with another label
/// and d_max the largest d_b within the component. Zero elsewhere, and zero
/// everywhere when the component covers the whole pool.
std::vector<double> boundary_bonus(const Eigen::MatrixXd& pool, const std::vector<int>& labels,
                                   int component, double weight);

/// Single-point form: `x` is scored against the probe set as classified by
/// `classifier`.
double boundary_bonus(std::span<const double> x, int component, const Classifier& classifier,
                      double weight, const Eigen::MatrixXd& probe_set);

struct Proposal {
  Point unit;
  int component = 0;
  /// Expected improvement at the chosen point divided by the component size.
  double weighted_ei = 0.0;
  /// No component had an admissible candidate; `unit` is uniform random.
  bool fallback = false;
};

/// Returns true for candidates that must not be proposed (e.g. lattice points
/// that were already evaluated).
using CandidateFilter = std::function<bool(std::span<const double> unit)>;

/// Per-component EI maximization over a fresh rotated-Halton pool, then the
/// size-weighted choice across components: argmax_j EI_j(x_j) / n_j.
/// Regions of a fixed partition that hold no data win outright.
Proposal propose_next(const CgpModel& model, const AcquisitionConfig& config, Rng& rng,
                      const CandidateFilter& reject = {});

/// Same selection over a caller-supplied pool. Exposed for testing.
Proposal propose_from_pool(const CgpModel& model, const AcquisitionConfig& config,
                           const Eigen::MatrixXd& pool, const CandidateFilter& reject = {});

}  // namespace cgp
