#include "sensnav/experiment.hpp"

#include <fstream>

#include "sensnav/errors.hpp"

namespace sensnav {

void ExperimentConfig::validate() const {
  world.validate();
  train.validate();
  rollout.validate();
  model.validate();
  if (observe.rays < 1) throw ConfigError("observe: rays must be >= 1");
  if (train.advantages != model.advantages)
    throw ConfigError("K differs between train (" + std::to_string(train.advantages) + ") and model (" +
                      std::to_string(model.advantages) + ")");
  if (model.input_width != observe.width())
    throw ConfigError("model input width " + std::to_string(model.input_width) + " != observation width " +
                      std::to_string(observe.width()));
  if (!(delta > 0)) throw ConfigError("delta must be > 0");
}

DatasetConfig ExperimentConfig::dataset_config() const {
  return {world, observe, train.advantages, delta};
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"world", to_json(c.world)},
          {"observe", to_json(c.observe)},
          {"train", to_json(c.train)},
          {"rollout", to_json(c.rollout)},
          {"model", to_json(c.model)},
          {"delta", c.delta},
          {"model_seed", c.model_seed},
          {"io",
           {{"dataset", c.io.dataset},
            {"checkpoint", c.io.checkpoint},
            {"report", c.io.report},
            {"history", c.io.history},
            {"plot", c.io.plot}}}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  auto section = [&](const char* key) { return j.contains(key) ? j.at(key) : nlohmann::json::object(); };
  c.world = world_config_from_json(section("world"));
  c.observe = observe_config_from_json(section("observe"));
  c.train = train_config_from_json(section("train"));
  c.rollout = rollout_config_from_json(section("rollout"));
  c.model = model_spec_from_json(section("model"));
  // A single K: whichever section sets it wins, train first.
  if (section("train").contains("advantages") && !section("model").contains("advantages"))
    c.model.advantages = c.train.advantages;
  if (section("model").contains("advantages") && !section("train").contains("advantages"))
    c.train.advantages = c.model.advantages;
  if (!section("model").contains("input_width")) c.model.input_width = c.observe.width();
  c.delta = j.value("delta", c.rollout.beta);
  c.model_seed = j.value("model_seed", c.model_seed);
  const auto io = section("io");
  c.io.dataset = io.value("dataset", c.io.dataset);
  c.io.checkpoint = io.value("checkpoint", c.io.checkpoint);
  c.io.report = io.value("report", c.io.report);
  c.io.history = io.value("history", c.io.history);
  c.io.plot = io.value("plot", c.io.plot);
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  try {
    return experiment_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

std::vector<EnvironmentMap> heldout_maps(const WorldConfig& world, std::size_t count, unsigned threads) {
  WorldConfig held = world;
  held.seed = world.seed + kHeldOutSeedOffset;
  return generate_maps(held, count, threads);
}

}  // namespace sensnav
