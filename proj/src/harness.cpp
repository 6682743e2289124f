#include "cgp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <sstream>
#include <thread>

#include "cgp/errors.hpp"

namespace cgp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed " + what + ": " + e.what());
  }
}

SearchSpace space_from_json(const json& j) {
  const json& dims = j.is_array() ? j : j.at("dims");
  std::vector<DimensionSpec> out;
  for (const auto& d : dims) {
    DimensionSpec spec;
    spec.lower = d.at("lower").get<double>();
    spec.upper = d.at("upper").get<double>();
    spec.kind = dim_kind_from_string(d.value("kind", std::string("continuous")));
    spec.step = d.value("step", 1L);
    out.push_back(spec);
  }
  try {
    return SearchSpace(std::move(out));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid search space: ") + e.what());
  }
}

json space_to_json(const SearchSpace& space) {
  json dims = json::array();
  for (const auto& d : space.dims()) {
    json e{{"lower", d.lower}, {"upper", d.upper}, {"kind", to_string(d.kind)}};
    if (d.kind == DimKind::integer_step) e["step"] = d.step;
    dims.push_back(e);
  }
  return json{{"dims", dims}};
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

SearchSpace parse_space(const std::string& json_text) {
  try {
    return space_from_json(parse_json(json_text, "space file"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid space file: ") + e.what());
  }
}

SearchSpace load_space(const fs::path& path) { return parse_space(read_file(path)); }

Objective make_objective(const ObjectiveSpec& spec, std::uint64_t seed) {
  Objective obj = [&]() -> Objective {
    if (!spec.replay_path.empty()) {
      if (!spec.space) throw ConfigError("replay objective needs a search space");
      auto table = std::make_shared<const ReplayTable>(ReplayTable::load(spec.replay_path, *spec.space));
      return replay(table, spec.direction.value_or(Direction::maximize));
    }
    if (!spec.command.empty()) {
      if (!spec.space) throw ConfigError("command objective needs a search space");
      return external_command(spec.command, *spec.space, spec.direction.value_or(Direction::minimize),
                              std::chrono::milliseconds(spec.timeout_ms));
    }
    if (spec.name.empty()) throw ConfigError("no objective given");
    Objective o = synthetic(spec.name);
    if (spec.direction && *spec.direction != o.direction) {
      o.direction = *spec.direction;
      o.known.reset();
    }
    return o;
  }();
  return with_noise(std::move(obj), spec.noise_sigma, seed);
}

FixedPartition parse_fixed_partition(const std::string& text, const SearchSpace& space) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  try {
    if (parts.size() == 3 && parts[0] == "bands") {
      const auto dim = static_cast<std::size_t>(std::stoul(parts[1]));
      if (dim >= space.dim()) throw ConfigError("bands dimension out of range");
      return band_partition(dim, std::stoi(parts[2]));
    }
    if (parts.size() == 3 && parts[0] == "split")
      return threshold_partition(space, static_cast<std::size_t>(std::stoul(parts[1])), std::stod(parts[2]));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError("bad fixed partition '" + text + "'");
  }
  throw ConfigError("fixed partition must be bands:DIM:COUNT or split:DIM:THRESHOLD (got '" + text + "')");
}

void BatchConfig::validate() const {
  if (variants.empty()) throw ConfigError("batch needs at least one variant");
  if (seeds.empty()) throw ConfigError("batch needs at least one seed");
  const int budget = variants.front().config.max_samples;
  const int pilot = variants.front().config.pilot_size;
  for (const auto& v : variants) {
    v.config.validate();
    if (v.config.max_samples != budget || v.config.pilot_size != pilot)
      throw ConfigError("all variants must share budget and pilot size");
  }
  for (std::size_t i = 0; i < variants.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (variants[i].name == variants[j].name) throw ConfigError("duplicate variant name '" + variants[i].name + "'");
}

namespace {

Variant variant_from_json(const json& j, const json& top, const SearchSpace& space) {
  Variant v;
  v.name = j.at("name").get<std::string>();
  EngineConfig& c = v.config;
  c.max_samples = get_or<int>(j, "budget", get_or<int>(top, "budget", 40));
  c.pilot_size = get_or<int>(j, "pilot", get_or<int>(top, "pilot", 10));
  c.partition_mode = partition_mode_from_string(get_or<std::string>(j, "partition", "learned"));
  if (j.contains("clustering")) c.clustering = parse_clustering(j.at("clustering").get<std::string>());
  c.clustering.xi = get_or<double>(j, "xi", 1.0);
  c.clustering.min_cluster_size = get_or<int>(j, "min_cluster", 0);
  c.classifier_k = get_or<int>(j, "classifier_k", 3);
  c.kernel = kernel_family_from_string(get_or<std::string>(j, "kernel", "matern32"));
  c.exploration_rate = get_or<double>(j, "explore", 0.8);
  c.acquisition.candidate_count = get_or<int>(j, "candidates", 2048);
  c.acquisition.boundary_weight = get_or<double>(j, "boundary_weight", 0.0);
  c.avoid_duplicates = get_or<bool>(j, "avoid_duplicates", true);
  if (c.partition_mode == PartitionMode::fixed) {
    v.fixed_spec = j.at("fixed").get<std::string>();
    c.fixed = parse_fixed_partition(v.fixed_spec, space);
  }
  return v;
}

json variant_to_json(const Variant& v) {
  const EngineConfig& c = v.config;
  json j{{"name", v.name},
         {"budget", c.max_samples},
         {"pilot", c.pilot_size},
         {"partition", to_string(c.partition_mode)},
         {"clustering", to_string(c.clustering)},
         {"xi", c.clustering.xi},
         {"min_cluster", c.clustering.min_cluster_size},
         {"classifier_k", c.classifier_k},
         {"kernel", to_string(c.kernel)},
         {"explore", c.exploration_rate},
         {"candidates", c.acquisition.candidate_count},
         {"boundary_weight", c.acquisition.boundary_weight},
         {"avoid_duplicates", c.avoid_duplicates}};
  if (!v.fixed_spec.empty()) j["fixed"] = v.fixed_spec;
  return j;
}

json objective_to_json(const ObjectiveSpec& o) {
  json j = json::object();
  if (!o.name.empty()) j["name"] = o.name;
  if (!o.replay_path.empty()) j["replay"] = o.replay_path;
  if (!o.command.empty()) {
    j["command"] = o.command;
    j["timeout_ms"] = o.timeout_ms;
  }
  if (o.space) j["space"] = space_to_json(*o.space);
  if (o.direction) j["direction"] = to_string(*o.direction);
  if (o.noise_sigma != 0.0) j["noise"] = o.noise_sigma;
  return j;
}

json batch_to_json(const BatchConfig& b) {
  json variants = json::array();
  for (const auto& v : b.variants) variants.push_back(variant_to_json(v));
  return json{{"objective", objective_to_json(b.objective)},
              {"seeds", b.seeds},
              {"shared_pilot", b.shared_pilot},
              {"checkpoints", b.checkpoints},
              {"variants", variants}};
}

}  // namespace

BatchConfig parse_batch_config(const std::string& json_text, const fs::path& base_dir) {
  const json top = parse_json(json_text, "batch config");
  try {
    BatchConfig b;
    const json& oj = top.at("objective");
    if (oj.is_string()) {
      b.objective.name = oj.get<std::string>();
    } else {
      b.objective.name = get_or<std::string>(oj, "name", "");
      if (oj.contains("replay")) {
        fs::path p = oj.at("replay").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        b.objective.replay_path = p.string();
      }
      b.objective.command = get_or<std::string>(oj, "command", "");
      b.objective.timeout_ms = get_or<int>(oj, "timeout_ms", 600000);
      if (oj.contains("space")) {
        const json& sj = oj.at("space");
        if (sj.is_string()) {
          fs::path p = sj.get<std::string>();
          if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
          b.objective.space = load_space(p);
        } else {
          b.objective.space = space_from_json(sj);
        }
      }
      if (oj.contains("direction"))
        b.objective.direction = direction_from_string(oj.at("direction").get<std::string>());
      b.objective.noise_sigma = get_or<double>(oj, "noise", 0.0);
    }

    const json& sj = top.at("seeds");
    if (sj.is_array()) {
      b.seeds = sj.get<std::vector<std::uint64_t>>();
    } else {
      const auto start = get_or<std::uint64_t>(sj, "start", 0);
      const auto count = sj.at("count").get<std::uint64_t>();
      for (std::uint64_t s = 0; s < count; ++s) b.seeds.push_back(start + s);
    }
    b.shared_pilot = get_or<bool>(top, "shared_pilot", true);
    if (top.contains("checkpoints")) b.checkpoints = top.at("checkpoints").get<std::vector<int>>();
    b.jobs = get_or<int>(top, "jobs", 1);

    const Objective probe = make_objective(b.objective, 0);
    for (const auto& vj : top.at("variants")) {
      Variant v = variant_from_json(vj, top, probe.space);
      v.config.acquisition.direction = probe.direction;
      b.variants.push_back(std::move(v));
    }
    b.validate();
    return b;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid batch config: ") + e.what());
  }
}

BatchConfig load_batch_config(const fs::path& path) {
  return parse_batch_config(read_file(path), path.parent_path());
}

std::uint64_t pilot_seed_for(std::uint64_t seed, const std::string& variant, bool shared_pilot) {
  if (shared_pilot) return seed;
  return Rng(seed).derive(variant).seed();
}

void write_trace(const fs::path& path, const RunResult& result, std::size_t dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << "step,source";
  for (std::size_t i = 0; i < dim; ++i) out << ",x" << i;
  out << ",y,ok,effective_k,component,best_y\n";
  bool have = false;
  double best = 0.0;
  for (const auto& r : result.records) {
    if (r.ok && (!have || better(r.y, best, result.direction))) {
      best = r.y;
      have = true;
    }
    out << r.step << ',' << to_string(r.source);
    for (double v : r.raw) out << ',' << format_double(v);
    out << ',' << (r.ok ? format_double(r.y) : std::string("nan")) << ',' << (r.ok ? 1 : 0) << ','
        << r.effective_k << ',' << r.component << ',' << (have ? format_double(best) : "nan") << '\n';
  }
}

RunResult read_trace(const fs::path& path, Direction direction) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace '" + path.string() + "'");
  RunResult result;
  result.direction = direction;
  std::string line;
  std::getline(in, line);
  std::size_t columns = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (columns < 7) throw ConfigError("trace '" + path.string() + "' has too few columns");
  const std::size_t dim = columns - 7;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != columns) throw ConfigError("malformed trace row in '" + path.string() + "'");
    StepRecord r;
    r.step = std::stoi(f[0]);
    r.source = step_source_from_string(f[1]);
    for (std::size_t i = 0; i < dim; ++i) r.raw.push_back(std::stod(f[2 + i]));
    r.ok = f[3 + dim] == "1";
    r.y = r.ok ? std::stod(f[2 + dim]) : std::numeric_limits<double>::quiet_NaN();
    r.effective_k = std::stoi(f[4 + dim]);
    r.component = std::stoi(f[5 + dim]);
    result.records.push_back(std::move(r));
  }
  result.update_best();
  return result;
}

BatchResult run_batch(const BatchConfig& config, const std::optional<fs::path>& out_dir) {
  config.validate();
  const Objective probe = make_objective(config.objective, 0);

  BatchResult batch;
  batch.direction = probe.direction;
  batch.known = probe.known;
  batch.pilot_size = config.variants.front().config.pilot_size;
  batch.dim = probe.space.dim();
  for (const auto& v : config.variants) batch.variants.push_back(v.name);
  batch.runs.assign(config.variants.size(), std::vector<SeedRun>(config.seeds.size()));

  if (out_dir) {
    fs::create_directories(*out_dir / "traces");
    for (const auto& v : config.variants) fs::create_directories(*out_dir / "traces" / v.name);
    std::ofstream(*out_dir / "batch.json", std::ios::binary) << batch_to_json(config).dump(2) << '\n';
  }

  const std::size_t total = config.variants.size() * config.seeds.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t v = task / config.seeds.size();
      const std::size_t s = task % config.seeds.size();
      const std::uint64_t seed = config.seeds[s];
      const Variant& variant = config.variants[v];
      SeedRun& slot = batch.runs[v][s];
      slot.seed = seed;
      try {
        const Objective obj = make_objective(config.objective, seed);
        EngineConfig ec = variant.config;
        ec.acquisition.direction = obj.direction;
        slot.result = optimize(obj.fn, obj.space, ec, seed,
                               pilot_seed_for(seed, variant.name, config.shared_pilot));
        if (out_dir)
          write_trace(*out_dir / "traces" / variant.name / ("seed_" + std::to_string(seed) + ".csv"),
                      slot.result, obj.space.dim());
      } catch (const std::exception& e) {
        slot.result.direction = probe.direction;
        slot.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (out_dir && batch.failed_runs() > 0) {
    std::ofstream err(*out_dir / "errors.txt", std::ios::binary);
    for (std::size_t v = 0; v < batch.runs.size(); ++v)
      for (const auto& run : batch.runs[v])
        if (!run.error.empty())
          err << batch.variants[v] << ",seed " << run.seed << ": " << run.error << '\n';
  }
  return batch;
}

std::size_t BatchResult::failed_runs() const {
  std::size_t n = 0;
  for (const auto& per_variant : runs)
    for (const auto& run : per_variant) n += run.error.empty() ? 0 : 1;
  return n;
}

std::optional<RunStats> compute_stats(const RunResult& result,
                                      const std::optional<KnownOptimum>& known,
                                      std::size_t evaluations) {
  if (!known) return std::nullopt;
  const auto best = result.best_within(evaluations);
  if (!best) return std::nullopt;
  return RunStats{known->distance_to(best->first), std::abs(known->value - best->second)};
}

PairedComparison paired_compare(const std::map<std::uint64_t, double>& baseline,
                                const std::map<std::uint64_t, double>& variant,
                                Direction direction) {
  if (baseline.size() != variant.size())
    throw ConfigError("paired comparison needs identical seed sets");
  PairedComparison out;
  std::size_t equal_or_better = 0, strictly = 0;
  for (const auto& [seed, b] : baseline) {
    const auto it = variant.find(seed);
    if (it == variant.end()) throw ConfigError("paired comparison needs identical seed sets");
    const double v = it->second;
    out.baseline.push_back(b);
    out.variant.push_back(v);
    if (better(v, b, direction)) ++strictly;
    if (better(v, b, direction) || v == b) ++equal_or_better;
  }
  if (baseline.empty()) return out;
  const auto n = static_cast<double>(baseline.size());
  out.equal_or_better = static_cast<double>(equal_or_better) / n;
  out.strictly_better = static_cast<double>(strictly) / n;
  return out;
}

double summarize_components(const std::vector<RunResult>& results, std::size_t evaluations) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : results) {
    if (r.records.empty()) continue;
    const std::size_t idx = std::min(evaluations, r.records.size()) - 1;
    sum += r.records[idx].effective_k;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void write_report(const BatchResult& batch, const std::vector<int>& checkpoints,
                  const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream stats(dir / "stats.csv", std::ios::binary);
  std::ofstream paired(dir / "paired.csv", std::ios::binary);
  std::ofstream comps(dir / "components.csv", std::ios::binary);
  stats << "variant,sequential,evaluations,runs,mean_best_y,mean_delta_argmax,mean_delta_max\n";
  paired << "variant,baseline,sequential,equal_or_better,strictly_better\n";
  comps << "variant,sequential,mean_effective_k\n";

  auto optima_at = [&](std::size_t v, std::size_t evals) {
    std::map<std::uint64_t, double> m;
    for (const auto& run : batch.runs[v]) {
      const auto best = run.result.best_within(evals);
      m[run.seed] = best ? best->second : std::numeric_limits<double>::quiet_NaN();
    }
    return m;
  };

  for (int cp : checkpoints) {
    const auto evals = static_cast<std::size_t>(batch.pilot_size + cp);
    bool reachable = false;
    for (const auto& runs : batch.runs)
      for (const auto& r : runs) reachable = reachable || r.result.records.size() >= evals;
    if (!reachable) continue;

    for (std::size_t v = 0; v < batch.variants.size(); ++v) {
      double sum_best = 0.0, sum_da = 0.0, sum_dm = 0.0;
      std::size_t n_best = 0, n_stats = 0;
      std::vector<RunResult> results;
      for (const auto& run : batch.runs[v]) {
        results.push_back(run.result);
        if (const auto best = run.result.best_within(evals)) {
          sum_best += best->second;
          ++n_best;
        }
        if (const auto st = compute_stats(run.result, batch.known, evals)) {
          sum_da += st->delta_argmax;
          sum_dm += st->delta_max;
          ++n_stats;
        }
      }
      stats << batch.variants[v] << ',' << cp << ',' << evals << ',' << batch.runs[v].size() << ','
            << (n_best ? format_double(sum_best / static_cast<double>(n_best)) : "nan") << ','
            << (n_stats ? format_double(sum_da / static_cast<double>(n_stats)) : "") << ','
            << (n_stats ? format_double(sum_dm / static_cast<double>(n_stats)) : "") << '\n';
      comps << batch.variants[v] << ',' << cp << ','
            << format_double(summarize_components(results, evals)) << '\n';
      if (v > 0) {
        const auto pc = paired_compare(optima_at(0, evals), optima_at(v, evals), batch.direction);
        paired << batch.variants[v] << ',' << batch.variants[0] << ',' << cp << ','
               << format_double(pc.equal_or_better) << ',' << format_double(pc.strictly_better)
               << '\n';
      }
    }
  }
}

BatchResult load_batch_result(const fs::path& dir, std::vector<int>* checkpoints) {
  const BatchConfig config = load_batch_config(dir / "batch.json");
  const Objective probe = make_objective(config.objective, 0);
  BatchResult batch;
  batch.direction = probe.direction;
  batch.known = probe.known;
  batch.pilot_size = config.variants.front().config.pilot_size;
  batch.dim = probe.space.dim();
  for (const auto& v : config.variants) {
    batch.variants.push_back(v.name);
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : config.seeds) {
      const fs::path p = dir / "traces" / v.name / ("seed_" + std::to_string(seed) + ".csv");
      SeedRun sr;
      sr.seed = seed;
      sr.result = fs::exists(p) ? read_trace(p, batch.direction) : RunResult{batch.direction, {}, {}, 0.0, false};
      runs.push_back(std::move(sr));
    }
    batch.runs.push_back(std::move(runs));
  }
  if (checkpoints) *checkpoints = config.checkpoints;
  return batch;
}

}  // namespace cgp
