#pragma once
// Imitation-learning data and training loop.
//
// Labels are cost-to-go advantages: for K headings u_k, the change in expert
// cost-to-go after a step of length delta along u_k. Headings whose step
// collides with the inflated map get a fixed +2*delta penalty.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sensnav/envgen.hpp"
#include "sensnav/neural.hpp"
#include "sensnav/observe.hpp"
#include "sensnav/planner.hpp"

namespace sensnav {

struct AdvantageLabel {
  std::vector<double> values;
  std::vector<bool> feasible;

  double min_feasible() const;
};

AdvantageLabel advantage_labels(const CostToGoField& f, Vec2 p, int K, double delta);

struct DatasetConfig {
  WorldConfig world;
  ObserveConfig observe;
  int advantages = 8;
  double delta = 0.15;

  double inflation() const { return world.robot_radius; }
};

struct Sample {
  std::uint64_t map_id = 0;
  EnvironmentMap map;
  std::vector<Observation> observations;  // per node, index 0 = robot
  std::vector<AdvantageLabel> labels;     // per node
  double expert_length = 0.0;             // cost-to-go from the robot start
  bool los = false;
};

struct Dataset {
  static constexpr int kFormatVersion = 1;
  DatasetConfig config;
  std::vector<Sample> samples;
};

struct DatasetStats {
  std::size_t maps = 0;
  std::size_t map_attempts = 0;  // includes rejected full-map attempts
  std::size_t labels = 0;
  std::size_t infeasible = 0;
  double min_advantage = 0.0;
  double max_feasible_advantage = 0.0;
  std::size_t los_maps = 0;
};

Sample make_sample(const EnvironmentMap& m, std::uint64_t map_id, const DatasetConfig& cfg);

/// Samples 0..count-1, each from its own (seed, index) stream.
Dataset build_dataset(const DatasetConfig& cfg, std::size_t count, unsigned threads = 1,
                      DatasetStats* stats = nullptr);

DatasetStats summarize(const Dataset& d);

/// JSON-lines: one header line, then one line per sample.
void write_dataset(const Dataset& d, std::ostream& os);
Dataset read_dataset(std::istream& is);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

nlohmann::json to_json(const DatasetConfig& c);

struct TrainConfig {
  int advantages = 8;
  int minibatch = 16;
  double base_lr = 0.001;
  double decay = 0.98;
  int epochs = 200;
  double train_fraction = 0.80;
  double eval_fraction = 0.19;
  double test_fraction = 0.01;
  std::uint64_t seed = 1265;
  double comm_range = kInfiniteRange;  // D_S used to build training graphs

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
  std::vector<std::size_t> test;
};

/// Seeded partition of [0, n).
Split split_indices(std::size_t n, const TrainConfig& tc);

/// Graph-ready tensors for one sample at communication range `range`.
GraphSample to_graph_sample(const Sample& s, double range);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double eval_l1 = 0.0;
  double lr = 0.0;
};

/// Index of the first minimum (the rule used to pick the returned checkpoint).
std::size_t best_epoch_index(const std::vector<double>& eval_l1);

struct TrainState {
  PolicyModel model;
  AdamState optimizer;
  int epoch = 0;  // completed epochs
  PolicyModel best_model;
  AdamState best_optimizer;
  int best_epoch = 0;
  double best_eval_l1 = 0.0;
  std::vector<EpochRecord> history;
};

/// Mean absolute error between predictions and labels over the given samples.
double mean_abs_error(const PolicyModel& model, const std::vector<const GraphSample*>& samples);

using EpochCallback = std::function<void(const TrainState&, const EpochRecord&)>;

/// Minibatch Adam on the train split; returns when tc.epochs epochs have run.
/// Pass `resume` to continue a previous run; the result is identical to an
/// uninterrupted run with the same seeds.
TrainState train(const Dataset& data, const TrainConfig& tc, const ModelSpec& spec, std::uint64_t init_seed,
                 std::optional<TrainState> resume = std::nullopt, const EpochCallback& on_epoch = {});

/// Checkpoint document. `best` selects the best-on-eval snapshot instead of
/// the latest state; both carry the full state needed to resume.
nlohmann::json checkpoint_to_json(const TrainState& s, const TrainConfig& tc, bool best);
TrainState checkpoint_from_json(const nlohmann::json& j);
/// The model stored in a checkpoint (best or latest, whichever was written).
PolicyModel checkpoint_model(const nlohmann::json& j);

}  // namespace sensnav
