#include <doctest.h>

#include <cmath>
#include <set>

#include "cgp/engine.hpp"
#include "cgp/errors.hpp"

using namespace cgp;

namespace {

const SearchSpace kUnit2({DimensionSpec::continuous(0, 1), DimensionSpec::continuous(0, 1)});

double bowl(std::span<const double> x) {
  return -((x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.6) * (x[1] - 0.6));
}

EngineConfig small_config(int budget = 20) {
  EngineConfig c;
  c.pilot_size = 6;
  c.max_samples = budget;
  c.acquisition.candidate_count = 256;
  c.clustering = parse_clustering("kmeans:2");
  return c;
}

Dataset dataset_from(const SearchSpace& space, const std::vector<Point>& raw, const EvalFn& f) {
  Dataset d;
  for (const auto& x : raw) d.add(Observation{x, space.normalize(x), f(x)});
  return d;
}

std::vector<Point> points(const RunResult& r) {
  std::vector<Point> out;
  for (const auto& rec : r.records) out.push_back(rec.raw);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  EngineConfig c;
  CHECK_NOTHROW(c.validate());
  c.exploration_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EngineConfig{};
  c.max_samples = 5;
  c.pilot_size = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EngineConfig{};
  c.partition_mode = PartitionMode::fixed;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EngineConfig{};
  c.pilot_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(partition_mode_from_string("single") == PartitionMode::single);
  CHECK_THROWS_AS(partition_mode_from_string("tree"), ConfigError);
}

TEST_CASE("single mode equals learned mode with one cluster") {
  Rng data_rng(4);
  std::vector<Point> raw;
  for (int i = 0; i < 15; ++i) raw.push_back(kUnit2.random_unit_point(data_rng));
  const Dataset d = dataset_from(kUnit2, raw, bowl);
  EngineConfig single = small_config();
  single.partition_mode = PartitionMode::single;
  EngineConfig learned = small_config();
  learned.clustering = parse_clustering("kmeans:1");
  Rng r1(9), r2(9);
  const CgpModel a = fit_cgp(d, single, r1);
  const CgpModel b = fit_cgp(d, learned, r2);
  CHECK(a.effective_k() == 1);
  CHECK(b.effective_k() == 1);
  for (int q = 0; q < 50; ++q) {
    const Point x = kUnit2.random_unit_point(data_rng);
    const auto pa = predict_cgp(a, x);
    const auto pb = predict_cgp(b, x);
    CHECK(pa.mean == pb.mean);
    CHECK(pa.variance == pb.variance);
  }
}

TEST_CASE("fixed rule on f1 data gives two half-line components") {
  const SearchSpace line({DimensionSpec::continuous(-1, 1)});
  std::vector<Point> raw;
  for (int i = 0; i < 10; ++i) raw.push_back({-1.0 + 2.0 * i / 9.0});
  const Dataset d = dataset_from(line, raw, [](std::span<const double> x) {
    return x[0] < 0 ? -x[0] + 1 : x[0] * x[0];
  });
  EngineConfig c = small_config();
  c.partition_mode = PartitionMode::fixed;
  c.fixed = threshold_partition(line, 0, 0.0);
  Rng rng(1);
  const CgpModel m = fit_cgp(d, c, rng);
  REQUIRE(m.effective_k() == 2);
  CHECK(m.sizes == std::vector<int>{5, 5});
  for (Eigen::Index i = 0; i < m.components[0]->train_x().rows(); ++i) CHECK(m.components[0]->train_x()(i, 0) < 0.5);
  for (Eigen::Index i = 0; i < m.components[1]->train_x().rows(); ++i) CHECK(m.components[1]->train_x()(i, 0) >= 0.5);
  CHECK(predict_cgp(m, Point{0.25}).label == 0);
  CHECK(predict_cgp(m, Point{0.75}).label == 1);
}

TEST_CASE("pruning can collapse the model to one component") {
  Rng data_rng(2);
  std::vector<Point> raw;
  for (int i = 0; i < 6; ++i) raw.push_back(kUnit2.random_unit_point(data_rng));
  const Dataset d = dataset_from(kUnit2, raw, bowl);
  EngineConfig c = small_config();
  c.clustering = parse_clustering("kmeans:3");
  c.clustering.min_cluster_size = 5;
  Rng rng(3);
  const CgpModel m = fit_cgp(d, c, rng);
  CHECK(m.effective_k() == 1);
  CHECK(m.label_count() == 1);
}

TEST_CASE("cgp prediction is classify then component predict") {
  Rng data_rng(6);
  std::vector<Point> raw;
  for (int i = 0; i < 12; ++i) raw.push_back(kUnit2.random_unit_point(data_rng));
  const Dataset d = dataset_from(kUnit2, raw, [](std::span<const double> x) {
    return x[0] < 0.5 ? 0.1 * x[1] : 5.0 + x[1];
  });
  EngineConfig c = small_config();
  c.clustering = parse_clustering("kmeans:2");
  Rng rng(3);
  const CgpModel m = fit_cgp(d, c, rng);
  CHECK(m.effective_k() == 2);
  for (int q = 0; q < 30; ++q) {
    const Point x = kUnit2.random_unit_point(data_rng);
    const int label = m.classifier.classify(x);
    const Prediction p = m.components[static_cast<std::size_t>(label)]->predict(x);
    const auto cp = predict_cgp(m, x);
    CHECK(cp.label == label);
    CHECK(cp.mean == p.mean);
    CHECK(cp.variance == p.variance);
  }
  // A training point that the classifier keeps in its own cluster is
  // near-interpolated by that cluster's component.
  int kept = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto cp = predict_cgp(m, d[i].unit);
    if (cp.label != m.labeling.labels[i]) continue;
    ++kept;
    CHECK(std::abs(cp.mean - d[i].y) < 0.1);
  }
  CHECK(kept >= 10);
}

TEST_CASE("exploration rate extremes") {
  EngineConfig c = small_config(16);
  c.exploration_rate = 0.0;
  const RunResult r0 = optimize(bowl, kUnit2, c, 3);
  for (std::size_t i = 6; i < r0.records.size(); ++i) CHECK(r0.records[i].source == StepSource::random);
  c.exploration_rate = 1.0;
  const RunResult r1 = optimize(bowl, kUnit2, c, 3);
  for (std::size_t i = 6; i < r1.records.size(); ++i) CHECK(r1.records[i].source == StepSource::acquisition);
  for (std::size_t i = 0; i < 6; ++i) CHECK(r1.records[i].source == StepSource::pilot);
}

TEST_CASE("runs are deterministic and budgets are exact") {
  int calls = 0;
  const EvalFn counted = [&](std::span<const double> x) {
    ++calls;
    return bowl(x);
  };
  const RunResult a = optimize(counted, kUnit2, small_config(18), 11);
  CHECK(calls == 18);
  const RunResult b = optimize(bowl, kUnit2, small_config(18), 11);
  CHECK(points(a) == points(b));
  CHECK(a.best_y == b.best_y);
  const RunResult c = optimize(bowl, kUnit2, small_config(18), 12);
  CHECK(points(a) != points(c));
}

TEST_CASE("best is consistent with the trace") {
  const RunResult r = optimize(bowl, kUnit2, small_config(20), 5);
  double best = -1e300;
  for (const auto& rec : r.records) best = std::max(best, rec.y);
  CHECK(r.best_y == best);
  CHECK(bowl(r.best_x) == r.best_y);
  CHECK(r.best_within(6)->second <= r.best_y);
}

TEST_CASE("a shorter run is a prefix of a longer one") {
  const RunResult short_run = optimize(bowl, kUnit2, small_config(14), 21);
  const RunResult long_run = optimize(bowl, kUnit2, small_config(24), 21);
  const auto a = points(short_run);
  const auto b = points(long_run);
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("budget equal to the pilot is random search") {
  EngineConfig c = small_config(6);
  const RunResult r = optimize(bowl, kUnit2, c, 2);
  CHECK(r.records.size() == 6);
  for (const auto& rec : r.records) CHECK(rec.source == StepSource::pilot);
}

TEST_CASE("constant objective") {
  const RunResult r = optimize([](std::span<const double>) { return 3.5; }, kUnit2, small_config(16), 1);
  CHECK(r.best_y == 3.5);
  for (const auto& rec : r.records) CHECK(rec.ok);
}

TEST_CASE("learned k=1 and single mode sample the same points") {
  EngineConfig single = small_config(20);
  single.partition_mode = PartitionMode::single;
  EngineConfig learned = small_config(20);
  learned.clustering = parse_clustering("kmeans:1");
  const RunResult a = optimize(bowl, kUnit2, single, 8);
  const RunResult b = optimize(bowl, kUnit2, learned, 8);
  CHECK(points(a) == points(b));
}

TEST_CASE("failed evaluations consume budget and stay out of the data") {
  const EvalFn flaky = [](std::span<const double> x) {
    if (x[0] > 0.7) throw EvaluationError("crashed", "segfault");
    return bowl(x);
  };
  Optimizer opt(kUnit2, small_config(20), 4);
  while (!opt.done()) opt.step(flaky);
  const RunResult& r = opt.result();
  CHECK(r.records.size() == 20);
  std::size_t ok = 0;
  for (const auto& rec : r.records) {
    if (rec.ok) {
      ++ok;
    } else {
      CHECK(rec.raw[0] > 0.7);
      CHECK(rec.error == "crashed");
    }
  }
  CHECK(opt.dataset().size() == ok);
  CHECK(ok < 20);
}

TEST_CASE("ask and tell reproduce optimize") {
  const RunResult ref = optimize(bowl, kUnit2, small_config(15), 7);
  Optimizer opt(kUnit2, small_config(15), 7);
  while (!opt.done()) {
    const Point x = opt.ask();
    CHECK(opt.ask() == x);
    opt.tell(x, bowl(x));
  }
  CHECK(points(opt.result()) == points(ref));
  CHECK_THROWS_AS(opt.ask(), DomainError);
}

TEST_CASE("observations stay on the lattice and are not repeated") {
  const SearchSpace ints({DimensionSpec::integer(1, 30)});
  EngineConfig c = small_config(25);
  c.exploration_rate = 1.0;
  const RunResult r = optimize([](std::span<const double> x) { return -std::abs(x[0] - 17.0); }, ints, c, 3);
  std::set<Point> seen;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    CHECK(ints.on_lattice(rec.raw));
    if (i >= 6) CHECK(seen.count(rec.raw) == 0);
    seen.insert(rec.raw);
  }
  CHECK(r.best_y == 0.0);
}

TEST_CASE("shared pilot seed gives identical pilots across configs") {
  EngineConfig a = small_config(12);
  EngineConfig b = small_config(12);
  b.partition_mode = PartitionMode::single;
  b.exploration_rate = 0.3;
  const RunResult ra = optimize(bowl, kUnit2, a, 100, 55);
  const RunResult rb = optimize(bowl, kUnit2, b, 200, 55);
  for (int i = 0; i < 6; ++i) CHECK(ra.records[static_cast<std::size_t>(i)].raw == rb.records[static_cast<std::size_t>(i)].raw);
}

TEST_CASE("dgm runs end to end") {
  EngineConfig c = small_config(20);
  c.clustering = parse_clustering("dgm:3");
  const RunResult r = optimize(bowl, kUnit2, c, 2);
  CHECK(r.records.size() == 20);
  for (const auto& rec : r.records) CHECK(rec.effective_k <= 3);
}
