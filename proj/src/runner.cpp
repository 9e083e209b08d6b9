#include "bond/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include "json.hpp"
#include <thread>

#include "bond/baselines.hpp"
#include "bond/bond_trainer.hpp"
#include "bond/error.hpp"
#include "bond/jbond.hpp"
#include "bond/metrics_csv.hpp"
#include "bond/text.hpp"

#ifndef BOND_VERSION
#define BOND_VERSION "unknown"
#endif

namespace bond {

namespace fs = std::filesystem;

const char* code_version() { return BOND_VERSION; }

int worker_count_from_env() {
  const char* raw = std::getenv("BOND_WORKERS");
  if (raw == nullptr || *raw == '\0') return 1;
  std::int64_t n = 0;
  try {
    n = text::parse_int(raw);
  } catch (const Error&) {
    throw ConfigError(std::string("BOND_WORKERS is not an integer: ") + raw);
  }
  if (n < 1 || n > 1024) throw ConfigError(std::string("BOND_WORKERS must be in [1, 1024]: ") + raw);
  return static_cast<int>(n);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const auto threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(guard);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

Scenario scenario_for(const ExperimentConfig& config, std::uint64_t seed) {
  return generate_scenario(config.scenario, config.scenario_params, config.scenario_seed_for(seed));
}

std::vector<MetricsRow> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                 const StepObserver& observer) {
  const Scenario sc = scenario_for(config, seed);
  TrainState state = TrainState::start(sc.reference);
  const LoopOptions loop{config.eval_every, observer};
  switch (config.algorithm) {
    case Algorithm::bond: {
      BondConfig c = config.bond;
      c.seed = seed;
      return run_bond(state, c, sc.prompts, c.steps, loop);
    }
    case Algorithm::iterative_bond: {
      BondConfig c = config.bond;
      c.seed = seed;
      return iterative_bond(state, c, sc.prompts, c.steps, loop);
    }
    case Algorithm::jbond: {
      JBondConfig c = config.jbond;
      c.seed = seed;
      return run_jbond(state, c, sc.prompts, loop);
    }
    case Algorithm::reinforce: {
      ReinforceConfig c = config.reinforce;
      c.seed = seed;
      return run_reinforce(state, c, sc.prompts, loop);
    }
  }
  return {};
}

namespace {

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

SeedOutput run_to_files(const ExperimentConfig& config, std::uint64_t seed) {
  SeedOutput out;
  out.seed = seed;
  out.csv = config.output / ("seed_" + std::to_string(seed) + ".csv");
  const fs::path ckpt_dir = config.output / ("seed_" + std::to_string(seed));
  if (config.checkpoints) make_dirs(ckpt_dir);

  std::ofstream csv(out.csv, std::ios::binary);
  if (!csv) throw IoError("cannot write " + out.csv.string());
  write_metrics_header(csv);
  run_seed(config, seed, [&](const TrainState& state, const MetricsRow& row) {
    write_metrics_row(csv, row);
    ++out.rows;
    if (config.checkpoints) {
      const std::string stem = "step_" + std::to_string(row.step);
      save_policy(ckpt_dir / (stem + ".policy.ckpt"), state.policy);
      save_policy(ckpt_dir / (stem + ".anchor.ckpt"), state.anchor);
    }
  });
  csv.flush();
  if (!csv) throw IoError("write failed: " + out.csv.string());
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, int workers) {
  make_dirs(config.output);
  ExperimentOutput result;
  result.seeds.resize(config.seeds.size());
  parallel_for(config.seeds.size(), workers,
               [&](std::size_t i) { result.seeds[i] = run_to_files(config, config.seeds[i]); });

  nlohmann::ordered_json manifest;
  manifest["name"] = config.name;
  manifest["algorithm"] = to_string(config.algorithm);
  manifest["config_hash"] = hash_hex(config.hash);
  manifest["code_version"] = code_version();
  manifest["scenario"] = config.scenario;
  manifest["steps"] = config.steps();
  manifest["eval_every"] = config.eval_every;
  manifest["runs"] = nlohmann::ordered_json::array();
  for (const auto& s : result.seeds) {
    manifest["runs"].push_back({{"seed", s.seed},
                                {"scenario_seed", config.scenario_seed_for(s.seed)},
                                {"csv", s.csv.filename().string()},
                                {"rows", s.rows}});
  }
  result.manifest = config.output / "manifest.json";
  std::ofstream out(result.manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + result.manifest.string());
  out << manifest.dump(2) << '\n';
  return result;
}

std::vector<ExperimentOutput> run_sweep(const fs::path& dir, int workers) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ini") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .ini configs in " + dir.string());
  std::vector<ExperimentConfig> configs;
  for (const auto& f : files) {
    try {
      configs.push_back(load_experiment_config(f));
    } catch (const Error& e) {
      throw ConfigError(f.string() + ": " + e.what());
    }
  }
  std::vector<ExperimentOutput> outputs(configs.size());
  // Configs are spread over the workers; seeds inside a config run serially.
  parallel_for(configs.size(), workers, [&](std::size_t i) { outputs[i] = run_experiment(configs[i], 1); });
  return outputs;
}

}  // namespace bond
