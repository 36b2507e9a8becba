#pragma once
// Closed-loop execution of a navigation policy and success/SPL metrics.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensnav/envgen.hpp"
#include "sensnav/neural.hpp"
#include "sensnav/observe.hpp"
#include "sensnav/planner.hpp"
#include "sensnav/rng.hpp"

namespace sensnav {

struct RolloutConfig {
  double alpha = 20.0;         // softmax temperature, 1/m
  double beta = 0.15;          // step length, m
  double goal_radius = 0.3;    // D_G, m
  int horizon = 500;           // T, steps
  double comm_range = kInfiniteRange;  // D_S at execution time
  double shield_radius = 0.25;
  double shield_gain = 0.02;
  bool greedy = false;         // argmin instead of sampling
  int stuck_steps = 20;
  double stuck_displacement = 1e-3;

  void validate() const;
};

nlohmann::json to_json(const RolloutConfig& c);
RolloutConfig rollout_config_from_json(const nlohmann::json& j, RolloutConfig base = {});

/// Produces the robot's K advantages for a world state whose sensors[0] is the
/// robot's current position.
class AdvantagePredictor {
 public:
  virtual ~AdvantagePredictor() = default;
  virtual std::vector<double> robot_advantages(const EnvironmentMap& state) const = 0;
};

/// Runs the trained network on freshly rendered observations of every sensor.
class ModelPredictor final : public AdvantagePredictor {
 public:
  ModelPredictor(const PolicyModel& model, ObserveConfig observe, double comm_range)
      : model_(model), observe_(observe), comm_range_(comm_range) {}
  std::vector<double> robot_advantages(const EnvironmentMap& state) const override;

 private:
  const PolicyModel& model_;
  ObserveConfig observe_;
  double comm_range_;
};

/// Ground-truth advantage labels in place of network predictions.
class ExpertPredictor final : public AdvantagePredictor {
 public:
  ExpertPredictor(const EnvironmentMap& m, double inflation, int advantages, double delta)
      : field_(build_field(m, inflation)), advantages_(advantages), delta_(delta) {}
  std::vector<double> robot_advantages(const EnvironmentMap& state) const override;

 private:
  CostToGoField field_;
  int advantages_;
  double delta_;
};

using PredictorFactory = std::function<std::unique_ptr<AdvantagePredictor>(const EnvironmentMap&)>;

/// softmax(-alpha * advantages), max-shifted.
std::vector<double> action_probabilities(std::span<const double> advantages, double alpha);

struct StepDecision {
  int heading = 0;
  Vec2 action;
  std::vector<double> advantages;
};

StepDecision policy_step(const AdvantagePredictor& predictor, const EnvironmentMap& m, Vec2 robot_pos,
                         const RolloutConfig& rc, Rng& rng);

/// Potential-field repulsion from raw obstacles and borders within the shield
/// radius, capped at beta, then truncated 1 mm short of any collision with the
/// inflated map.
Vec2 shield(const EnvironmentMap& m, const InflatedMap& inflated, Vec2 robot_pos, Vec2 action,
            const RolloutConfig& rc);

enum class Outcome { Success, Timeout, Stuck };
std::string to_string(Outcome o);

struct EpisodeTrace {
  std::vector<Vec2> positions;
  std::vector<Vec2> actions;
  Outcome outcome = Outcome::Timeout;
  double path_length = 0.0;    // p
  double expert_length = 0.0;  // P
  bool los = false;
  int steps() const { return static_cast<int>(actions.size()); }
};

EpisodeTrace run_episode(const AdvantagePredictor& predictor, const EnvironmentMap& m, const RolloutConfig& rc,
                         double inflation, Rng& rng);

struct EpisodeRecord {
  std::uint64_t map_id = 0;
  Outcome outcome = Outcome::Timeout;
  double path_length = 0.0;
  double expert_length = 0.0;
  bool los = false;
  int steps = 0;
};

struct MetricsRow {
  std::size_t count = 0;
  double success = 0.0;
  double spl = 0.0;
  double mean_path_success = 0.0;  // mean p over successful episodes
};

/// Success rate, SPL = mean C*P/max(p,P), and mean successful p.
MetricsRow aggregate(std::span<const EpisodeRecord> episodes);

struct MetricsReport {
  MetricsRow los;
  MetricsRow nlos;
  MetricsRow all;
  std::vector<EpisodeRecord> episodes;
  nlohmann::json config;
  std::optional<double> train_comm_range;
  double eval_comm_range = kInfiniteRange;

  bool comm_range_mismatch() const;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  double inflation = 0.16;
  unsigned threads = 1;
  std::vector<std::uint64_t> map_ids;  // defaults to positions in `maps`
  std::optional<double> train_comm_range;
  /// Optional per-episode trace sink, called in map order.
  std::function<void(std::size_t, const EnvironmentMap&, const EpisodeTrace&)> on_trace;
};

MetricsReport evaluate(const PredictorFactory& factory, const std::vector<EnvironmentMap>& maps,
                       const RolloutConfig& rc, const EvalOptions& opts);

nlohmann::json to_json(const MetricsReport& r);
/// Plain-text LOS/NLOS x Success/SPL table.
std::string format_table(const MetricsReport& r);

nlohmann::json trace_to_json(const EnvironmentMap& m, const EpisodeTrace& t, const std::vector<Vec2>& expert_path);

}  // namespace sensnav
