#include <doctest.h>

#include <cmath>
#include <limits>

#include "cgp/acquisition.hpp"
#include "cgp/qmc.hpp"
#include "oracles.hpp"

using namespace cgp;

namespace {

// Two components on [0,1] split at 0.5, each fitted to its own points.
CgpModel split_model(Rng& rng, int per_side, Direction dir) {
  CgpModel m;
  m.dim = 1;
  m.classifier = Classifier(FixedPartition{2, [](std::span<const double> u) { return u[0] < 0.5 ? 0 : 1; }});
  for (int side = 0; side < 2; ++side) {
    Eigen::MatrixXd X(per_side, 1);
    Eigen::VectorXd y(per_side);
    for (int i = 0; i < per_side; ++i) {
      X(i, 0) = 0.5 * side + 0.5 * rng.uniform();
      y(i) = std::sin(9 * X(i, 0)) + 0.3 * rng.normal() + side;
    }
    m.components.push_back(FittedComponent::with_parameters(
        X, y, {KernelFamily::matern32, 0.05 + 0.3 * rng.uniform(), 1.0}, 1e-3));
    m.sizes.push_back(per_side);
    m.incumbents.push_back(dir == Direction::maximize ? y.maxCoeff() : y.minCoeff());
  }
  return m;
}

CgpModel single_model(Rng& rng, int n) {
  CgpModel m;
  m.dim = 2;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X.row(i) << rng.uniform(), rng.uniform();
    y(i) = X(i, 0) * X(i, 1) + 0.1 * std::cos(7 * X(i, 0));
  }
  m.components.push_back(FittedComponent::with_parameters(X, y, {KernelFamily::matern52, 0.3, 1.0}, 1e-4));
  m.sizes.push_back(n);
  m.incumbents.push_back(y.maxCoeff());
  return m;
}

struct Brute {
  int component = -1;
  Eigen::Index index = -1;
  double best_ei[2] = {0, 0};
};

// Exhaustive evaluation of argmax_j max_x EI_j(x) / n_j over the pool.
Brute brute_force(const CgpModel& m, const Eigen::MatrixXd& pool, Direction dir) {
  Brute b;
  double best = -1;
  Eigen::Index arg[2] = {-1, -1};
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    const double x[] = {pool(i, 0)};
    const int j = x[0] < 0.5 ? 0 : 1;
    const Prediction p = m.components[static_cast<std::size_t>(j)]->predict(x);
    const double ei = expected_improvement(p.mean, std::sqrt(p.variance), m.incumbents[static_cast<std::size_t>(j)], dir);
    if (arg[j] < 0 || ei > b.best_ei[j]) {
      b.best_ei[j] = ei;
      arg[j] = i;
    }
  }
  for (int j = 0; j < 2; ++j) {
    if (arg[j] < 0) continue;
    const double w = b.best_ei[j] / m.sizes[static_cast<std::size_t>(j)];
    if (w > best) {
      best = w;
      b.component = j;
      b.index = arg[j];
    }
  }
  return b;
}

}  // namespace

TEST_CASE("expected improvement closed form") {
  CHECK(expected_improvement(1.3, 0.0, 1.0, Direction::maximize) == doctest::Approx(0.3));
  CHECK(expected_improvement(0.7, 0.0, 1.0, Direction::maximize) == 0.0);
  CHECK(expected_improvement(0.7, 0.0, 1.0, Direction::minimize) == doctest::Approx(0.3));
  CHECK(expected_improvement(2.0, 1.0, 2.0, Direction::maximize) == doctest::Approx(0.398942).epsilon(1e-6));
  CHECK(expected_improvement(2.0, 1.0, 2.0, Direction::minimize) == doctest::Approx(0.398942).epsilon(1e-6));
  // Minimize mirrors maximize by sign.
  CHECK(expected_improvement(-0.4, 0.7, 0.2, Direction::minimize) ==
        doctest::Approx(expected_improvement(0.4, 0.7, -0.2, Direction::maximize)));
  CHECK(expected_improvement(-50.0, 1.0, 0.0, Direction::maximize) >= 0.0);
}

TEST_CASE("expected improvement matches Monte-Carlo") {
  const auto mc = oracle::expected_improvement(-1.0, 0.5, 0.0, 1000000, 99);
  const double ei = expected_improvement(-1.0, 0.5, 0.0, Direction::maximize);
  CHECK(std::abs(ei - mc.estimate) <= 3 * mc.standard_error);
}

TEST_CASE("expected improvement is monotone") {
  double prev = 0.0;
  for (double mean = -3; mean <= 3; mean += 0.05) {
    const double ei = expected_improvement(mean, 0.8, 0.0, Direction::maximize);
    CHECK(ei >= prev);
    prev = ei;
  }
  prev = 0.0;
  for (double sd = 0.0; sd <= 4; sd += 0.05) {
    const double ei = expected_improvement(-0.5, sd, 0.0, Direction::maximize);
    CHECK(ei >= prev);
    prev = ei;
  }
}

TEST_CASE("normal helpers") {
  CHECK(standard_normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(standard_normal_cdf(1.959963984540054) == doctest::Approx(0.975));
  CHECK(standard_normal_pdf(0.0) == doctest::Approx(1 / std::sqrt(2 * 3.141592653589793)));
}

TEST_CASE("boundary bonus") {
  Rng rng(3);
  const Eigen::MatrixXd pool = rotated_halton(256, 2, rng);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < pool.rows(); ++i) labels.push_back(pool(i, 0) < 0.4 ? 0 : 1);

  for (double b : boundary_bonus(pool, labels, 0, 0.0)) CHECK(b == 0.0);
  const std::vector<int> one(labels.size(), 0);
  for (double b : boundary_bonus(pool, one, 0, 2.0)) CHECK(b == 0.0);

  const auto bonus = boundary_bonus(pool, labels, 0, 2.0);
  double max_b = -1;
  std::size_t arg_max = 0, arg_near = 0;
  double nearest = 1e9;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      CHECK(bonus[i] == 0.0);
      continue;
    }
    CHECK(bonus[i] >= 0.0);
    CHECK(bonus[i] <= 2.0);
    if (bonus[i] > max_b) {
      max_b = bonus[i];
      arg_max = i;
    }
    double d = 1e9;
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] != 0) d = std::min(d, (pool.row(static_cast<Eigen::Index>(i)) - pool.row(static_cast<Eigen::Index>(k))).norm());
    if (d < nearest) {
      nearest = d;
      arg_near = i;
    }
  }
  CHECK(arg_max == arg_near);

  const Classifier rule(FixedPartition{2, [](std::span<const double> u) { return u[0] < 0.4 ? 0 : 1; }});
  for (std::size_t i = 0; i < labels.size(); i += 17) {
    if (labels[i] != 0) continue;
    const double x[] = {pool(static_cast<Eigen::Index>(i), 0), pool(static_cast<Eigen::Index>(i), 1)};
    CHECK(boundary_bonus(x, 0, rule, 2.0, pool) == doctest::Approx(bonus[i]));
  }
}

TEST_CASE("weighted selection equals brute-force enumeration") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const Direction dir = seed % 2 ? Direction::minimize : Direction::maximize;
    CgpModel m = split_model(rng, 6, dir);
    m.sizes = {1 + static_cast<int>(rng.index(20)), 1 + static_cast<int>(rng.index(20))};
    const Eigen::MatrixXd pool = rotated_halton(512, 1, rng);
    AcquisitionConfig cfg;
    cfg.direction = dir;
    const Proposal p = propose_from_pool(m, cfg, pool);
    const Brute b = brute_force(m, pool, dir);
    CHECK(p.component == b.component);
    CHECK(p.unit[0] == pool(b.index, 0));
    CHECK(p.weighted_ei == doctest::Approx(b.best_ei[b.component] / m.sizes[static_cast<std::size_t>(b.component)]));
  }
}

TEST_CASE("size weighting can favour the component with lower EI") {
  Rng rng(5);
  CgpModel m = split_model(rng, 6, Direction::maximize);
  const Eigen::MatrixXd pool = rotated_halton(512, 1, rng);
  m.sizes = {1, 1};
  const Brute raw = brute_force(m, pool, Direction::maximize);
  const int hi = raw.best_ei[0] >= raw.best_ei[1] ? 0 : 1;
  const int lo = 1 - hi;
  REQUIRE(raw.best_ei[lo] > 0.0);
  // Pick sizes so that the lower raw EI has the larger per-sample value,
  // like EI 1.0 over n=10 losing to EI 0.3 over n=2.
  m.sizes[static_cast<std::size_t>(lo)] = 2;
  m.sizes[static_cast<std::size_t>(hi)] = static_cast<int>(std::ceil(2 * raw.best_ei[hi] / raw.best_ei[lo])) + 1;
  const Proposal p = propose_from_pool(m, AcquisitionConfig{}, pool);
  CHECK(p.component == lo);
}

TEST_CASE("common rescaling of sizes keeps the chosen component") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    CgpModel m = split_model(rng, 5, Direction::maximize);
    m.sizes = {3 + static_cast<int>(rng.index(5)), 3 + static_cast<int>(rng.index(5))};
    const Eigen::MatrixXd pool = rotated_halton(256, 1, rng);
    const Proposal a = propose_from_pool(m, {}, pool);
    for (int& s : m.sizes) s *= 7;
    const Proposal b = propose_from_pool(m, {}, pool);
    CHECK(a.component == b.component);
    CHECK(a.unit == b.unit);
  }
}

TEST_CASE("single component reduces to plain EI argmax") {
  Rng rng(8);
  const CgpModel m = single_model(rng, 10);
  const Eigen::MatrixXd pool = rotated_halton(1024, 2, rng);
  const Proposal p = propose_from_pool(m, {}, pool);
  Eigen::VectorXd mean, var;
  m.components[0]->predict_batch(pool, mean, var);
  Eigen::Index best = 0;
  double best_ei = -1;
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    const double ei = expected_improvement(mean(i), std::sqrt(var(i)), m.incumbents[0], Direction::maximize);
    if (ei > best_ei) {
      best_ei = ei;
      best = i;
    }
  }
  CHECK(p.component == 0);
  CHECK(p.unit[0] == pool(best, 0));
  CHECK(p.unit[1] == pool(best, 1));
}

TEST_CASE("proposals lie in the cube and in the returned component") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const CgpModel m = split_model(rng, 5, Direction::maximize);
    AcquisitionConfig cfg;
    cfg.candidate_count = 300;
    cfg.boundary_weight = seed % 2 ? 0.5 : 0.0;
    Rng step = rng.derive("acquire");
    const Proposal p = propose_next(m, cfg, step);
    CHECK(p.unit[0] >= 0.0);
    CHECK(p.unit[0] <= 1.0);
    CHECK(m.classifier.classify(p.unit) == p.component);
    Rng again = rng.derive("acquire");
    CHECK(propose_next(m, cfg, again).unit == p.unit);
  }
}

TEST_CASE("rejected candidates and fallback") {
  Rng rng(1);
  const CgpModel m = split_model(rng, 5, Direction::maximize);
  AcquisitionConfig cfg;
  cfg.candidate_count = 64;
  Rng a(4);
  const Proposal left_only = propose_next(m, cfg, a, [](std::span<const double> u) { return u[0] >= 0.5; });
  CHECK(left_only.component == 0);
  CHECK(left_only.unit[0] < 0.5);

  Rng b(4);
  const Proposal none = propose_next(m, cfg, b, [](std::span<const double>) { return true; });
  CHECK(none.fallback);
  CHECK(none.unit.size() == 1);
  CHECK(none.unit[0] >= 0.0);
  CHECK(none.unit[0] <= 1.0);
}

TEST_CASE("a region without data wins outright") {
  Rng rng(2);
  CgpModel m = split_model(rng, 5, Direction::maximize);
  m.components[1].reset();
  m.sizes[1] = 0;
  const Eigen::MatrixXd pool = rotated_halton(128, 1, rng);
  const Proposal p = propose_from_pool(m, {}, pool);
  CHECK(p.component == 1);
  CHECK(p.unit[0] >= 0.5);
  CHECK(std::isinf(p.weighted_ei));
}
