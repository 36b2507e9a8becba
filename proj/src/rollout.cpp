#include "sensnav/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sensnav/errors.hpp"
#include "sensnav/imitate.hpp"

namespace sensnav {

void RolloutConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("rollout: alpha must be > 0");
  if (!(beta > 0)) throw ConfigError("rollout: beta must be > 0");
  if (!(goal_radius > 0)) throw ConfigError("rollout: goal_radius must be > 0");
  if (horizon < 1) throw ConfigError("rollout: horizon must be >= 1");
  if (!(comm_range >= 0)) throw ConfigError("rollout: comm_range must be >= 0");
  if (!(shield_radius >= 0) || !(shield_gain >= 0)) throw ConfigError("rollout: shield parameters must be >= 0");
  if (stuck_steps < 1) throw ConfigError("rollout: stuck_steps must be >= 1");
}

nlohmann::json to_json(const RolloutConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"goal_radius", c.goal_radius},
          {"horizon", c.horizon},
          {"comm_range", range_to_json(c.comm_range)},
          {"shield_radius", c.shield_radius},
          {"shield_gain", c.shield_gain},
          {"greedy", c.greedy},
          {"stuck_steps", c.stuck_steps},
          {"stuck_displacement", c.stuck_displacement}};
}

RolloutConfig rollout_config_from_json(const nlohmann::json& j, RolloutConfig c) {
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.goal_radius = j.value("goal_radius", c.goal_radius);
  c.horizon = j.value("horizon", c.horizon);
  if (j.contains("comm_range")) c.comm_range = range_from_json(j.at("comm_range"));
  c.shield_radius = j.value("shield_radius", c.shield_radius);
  c.shield_gain = j.value("shield_gain", c.shield_gain);
  c.greedy = j.value("greedy", c.greedy);
  c.stuck_steps = j.value("stuck_steps", c.stuck_steps);
  c.stuck_displacement = j.value("stuck_displacement", c.stuck_displacement);
  return c;
}

std::vector<double> ModelPredictor::robot_advantages(const EnvironmentMap& state) const {
  const Tensor2 inputs = stack_observations(render_all(state, observe_));
  const CommGraph g = build_comm_graph(state.sensors, comm_range_);
  const Tensor2 out = forward_all(model_, inputs, g);
  return {out.row(0).data(), out.row(0).data() + out.cols()};
}

std::vector<double> ExpertPredictor::robot_advantages(const EnvironmentMap& state) const {
  return advantage_labels(field_, state.robot(), advantages_, delta_).values;
}

std::vector<double> action_probabilities(std::span<const double> advantages, double alpha) {
  std::vector<double> p(advantages.size());
  if (advantages.empty()) return p;
  const double lo = *std::min_element(advantages.begin(), advantages.end());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(-alpha * (advantages[k] - lo));
    total += p[k];
  }
  for (auto& v : p) v /= total;
  return p;
}

StepDecision policy_step(const AdvantagePredictor& predictor, const EnvironmentMap& m, Vec2 robot_pos,
                         const RolloutConfig& rc, Rng& rng) {
  EnvironmentMap state = m;
  state.sensors.at(0) = robot_pos;
  StepDecision d;
  d.advantages = predictor.robot_advantages(state);
  if (d.advantages.empty()) throw DimensionMismatch("policy produced no advantages");
  if (rc.greedy) {
    d.heading = static_cast<int>(std::min_element(d.advantages.begin(), d.advantages.end()) - d.advantages.begin());
  } else {
    const auto probs = action_probabilities(d.advantages, rc.alpha);
    d.heading = static_cast<int>(rng.categorical(probs));
  }
  d.action = direction(d.heading, static_cast<int>(d.advantages.size())) * rc.beta;
  return d;
}

Vec2 shield(const EnvironmentMap& m, const InflatedMap& inflated, Vec2 robot_pos, Vec2 action,
            const RolloutConfig& rc) {
  const double radius = rc.shield_radius;
  Vec2 push{};
  auto repel = [&](double d, Vec2 away) {
    if (d > 0.0 && d < radius) push += away * (rc.shield_gain * (1.0 / d - 1.0 / radius));
  };
  for (const auto& r : m.obstacles) {
    const Vec2 c = closest_point_on_rect(r, robot_pos);
    const double d = distance(robot_pos, c);
    if (d > 0.0) repel(d, (robot_pos - c) * (1.0 / d));
  }
  const Rect& b = m.bounds;
  repel(robot_pos.x - b.x0, {1.0, 0.0});
  repel(b.x1 - robot_pos.x, {-1.0, 0.0});
  repel(robot_pos.y - b.y0, {0.0, 1.0});
  repel(b.y1 - robot_pos.y, {0.0, -1.0});

  Vec2 out = action + push;
  const double len = out.norm();
  if (len > rc.beta) out = out * (rc.beta / len);

  const double step = out.norm();
  if (step == 0.0) return out;
  const double t = inflated.free_fraction(robot_pos, robot_pos + out);
  if (t < 1.0) {
    constexpr double kBackoff = 1e-3;
    const double allowed = std::max(0.0, t * step - kBackoff);
    out = out * (allowed / step);
  }
  return out;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Success:
      return "success";
    case Outcome::Timeout:
      return "timeout";
    case Outcome::Stuck:
      return "stuck";
  }
  return "timeout";
}

EpisodeTrace run_episode(const AdvantagePredictor& predictor, const EnvironmentMap& m, const RolloutConfig& rc,
                         double inflation, Rng& rng) {
  rc.validate();
  const CostToGoField field = build_field(m, inflation);
  EpisodeTrace tr;
  Vec2 pos = m.robot();
  tr.positions.push_back(pos);
  tr.expert_length = field.cost_to_go(pos);
  tr.los = segment_free(m, pos, m.target, 0.0);
  if (distance(pos, m.target) < rc.goal_radius) {
    tr.outcome = Outcome::Success;
    return tr;
  }
  int still = 0;
  for (int t = 0; t < rc.horizon; ++t) {
    const StepDecision d = policy_step(predictor, m, pos, rc, rng);
    const Vec2 a = shield(m, field.inflated(), pos, d.action, rc);
    pos += a;
    tr.actions.push_back(a);
    tr.positions.push_back(pos);
    const double moved = a.norm();
    tr.path_length += moved;
    if (distance(pos, m.target) < rc.goal_radius) {
      tr.outcome = Outcome::Success;
      return tr;
    }
    still = moved < rc.stuck_displacement ? still + 1 : 0;
    if (still >= rc.stuck_steps) {
      tr.outcome = Outcome::Stuck;
      return tr;
    }
  }
  tr.outcome = Outcome::Timeout;
  return tr;
}

MetricsRow aggregate(std::span<const EpisodeRecord> episodes) {
  MetricsRow row;
  row.count = episodes.size();
  if (episodes.empty()) return row;
  double successes = 0.0;
  double spl = 0.0;
  double p_success = 0.0;
  for (const auto& e : episodes) {
    if (e.outcome != Outcome::Success) continue;
    successes += 1.0;
    const double denom = std::max(e.path_length, e.expert_length);
    spl += denom > 0.0 ? e.expert_length / denom : 1.0;
    p_success += e.path_length;
  }
  const double n = static_cast<double>(episodes.size());
  row.success = successes / n;
  row.spl = spl / n;
  row.mean_path_success = successes > 0 ? p_success / successes : 0.0;
  return row;
}

bool MetricsReport::comm_range_mismatch() const {
  if (!train_comm_range) return false;
  if (std::isinf(*train_comm_range) && std::isinf(eval_comm_range)) return false;
  return *train_comm_range != eval_comm_range;
}

MetricsReport evaluate(const PredictorFactory& factory, const std::vector<EnvironmentMap>& maps,
                       const RolloutConfig& rc, const EvalOptions& opts) {
  rc.validate();
  if (maps.empty()) throw ConfigError("evaluate: no maps");
  if (!opts.map_ids.empty() && opts.map_ids.size() != maps.size()) throw ConfigError("evaluate: map id count differs");

  std::vector<EpisodeTrace> traces(maps.size());
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(maps.size())));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned worker) {
    try {
      for (std::size_t i = worker; i < maps.size(); i += threads) {
        const auto predictor = factory(maps[i]);
        Rng rng(derive_seed(opts.seed, {static_cast<std::uint64_t>(i)}));
        traces[i] = run_episode(*predictor, maps[i], rc, opts.inflation, rng);
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  MetricsReport r;
  std::vector<EpisodeRecord> los;
  std::vector<EpisodeRecord> nlos;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& t = traces[i];
    const EpisodeRecord e{opts.map_ids.empty() ? i : opts.map_ids[i], t.outcome, t.path_length, t.expert_length,
                          t.los, t.steps()};
    r.episodes.push_back(e);
    (e.los ? los : nlos).push_back(e);
    if (opts.on_trace) opts.on_trace(i, maps[i], t);
  }
  r.los = aggregate(los);
  r.nlos = aggregate(nlos);
  r.all = aggregate(r.episodes);
  r.config = to_json(rc);
  r.train_comm_range = opts.train_comm_range;
  r.eval_comm_range = rc.comm_range;
  return r;
}

namespace {

nlohmann::json row_to_json(const MetricsRow& row) {
  return {{"M", row.count}, {"success", row.success}, {"spl", row.spl}, {"mean_path_success", row.mean_path_success}};
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["config"] = r.config;
  j["eval_comm_range"] = range_to_json(r.eval_comm_range);
  j["train_comm_range"] = r.train_comm_range ? range_to_json(*r.train_comm_range) : nlohmann::json();
  j["comm_range_mismatch"] = r.comm_range_mismatch();
  j["aggregate"] = {{"los", row_to_json(r.los)}, {"nlos", row_to_json(r.nlos)}, {"all", row_to_json(r.all)}};
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes)
    j["episodes"].push_back({{"map_id", e.map_id},
                             {"outcome", to_string(e.outcome)},
                             {"p", e.path_length},
                             {"P", e.expert_length},
                             {"los", e.los},
                             {"steps", e.steps}});
  return j;
}

std::string format_table(const MetricsReport& r) {
  std::ostringstream range;
  if (std::isinf(r.eval_comm_range))
    range << "inf";
  else
    range << std::setprecision(2) << r.eval_comm_range;
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "          |  LOS (M=" << r.los.count << ")  |  NLOS (M=" << r.nlos.count << ")  |  all (M=" << r.all.count
     << ")\n";
  os << "          | Success   SPL | Success   SPL | Success   SPL\n";
  os << "  D_S=" << std::setw(4) << range.str() << " |  " << r.los.success << "  " << r.los.spl << " |  "
     << r.nlos.success << "  " << r.nlos.spl << " |  " << r.all.success << "  " << r.all.spl << "\n";
  if (r.comm_range_mismatch()) os << "  note: evaluation D_S differs from the training D_S\n";
  return os.str();
}

nlohmann::json trace_to_json(const EnvironmentMap& m, const EpisodeTrace& t, const std::vector<Vec2>& expert_path) {
  auto points = [](const std::vector<Vec2>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : v) arr.push_back({p.x, p.y});
    return arr;
  };
  return {{"map", to_json(m)},
          {"positions", points(t.positions)},
          {"expert_path", points(expert_path)},
          {"outcome", to_string(t.outcome)},
          {"p", t.path_length},
          {"P", t.expert_length},
          {"los", t.los}};
}

}  // namespace sensnav
