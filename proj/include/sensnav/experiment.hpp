#pragma once
// Resolved experiment configuration shared by the command-line tools.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensnav/envgen.hpp"
#include "sensnav/imitate.hpp"
#include "sensnav/neural.hpp"
#include "sensnav/observe.hpp"
#include "sensnav/rollout.hpp"

namespace sensnav {

struct IoConfig {
  std::string dataset = "dataset.jsonl";
  std::string checkpoint = "model.json";
  std::string report = "report.json";
  std::string history = "history.csv";
  std::string plot = "plot.svg";
};

struct ExperimentConfig {
  WorldConfig world;
  ObserveConfig observe;
  TrainConfig train;
  RolloutConfig rollout;
  ModelSpec model;
  double delta = 0.15;  // label step; follows rollout.beta unless given
  std::uint64_t model_seed = 1265;
  IoConfig io;

  /// Cross-field checks: shared K, observation width, per-section invariants.
  void validate() const;
  DatasetConfig dataset_config() const;
};

/// Held-out maps come from seed + 2^31 so they never coincide with training maps.
inline constexpr std::uint64_t kHeldOutSeedOffset = std::uint64_t{1} << 31;

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing sections and keys keep their defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

std::vector<EnvironmentMap> heldout_maps(const WorldConfig& world, std::size_t count, unsigned threads = 1);

}  // namespace sensnav
