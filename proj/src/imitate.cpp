#include "sensnav/imitate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "sensnav/errors.hpp"
#include "sensnav/rng.hpp"

namespace sensnav {

namespace {

constexpr int kResampleLimit = 16;

Observation observation_from_flat(const std::vector<double>& flat) {
  if (flat.size() % kRayFeatures != 0) throw DimensionMismatch("observation length is not a multiple of 7");
  Observation o;
  o.rays.resize(flat.size() / kRayFeatures);
  for (std::size_t r = 0; r < o.rays.size(); ++r) {
    o.rays[r].distance = flat[r * kRayFeatures];
    for (int c = 0; c < kHitClassCount; ++c)
      if (flat[r * kRayFeatures + 1 + c] > 0.5) o.rays[r].hit = static_cast<HitClass>(c);
  }
  return o;
}

nlohmann::json sample_to_json(const Sample& s) {
  nlohmann::json j;
  j["map_id"] = s.map_id;
  j["map"] = to_json(s.map);
  j["observations"] = nlohmann::json::array();
  for (const auto& o : s.observations) j["observations"].push_back(o.flatten());
  j["advantages"] = nlohmann::json::array();
  j["feasible"] = nlohmann::json::array();
  for (const auto& l : s.labels) {
    j["advantages"].push_back(l.values);
    j["feasible"].push_back(l.feasible);
  }
  j["expert_length"] = s.expert_length;
  j["los"] = s.los;
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.map_id = j.at("map_id").get<std::uint64_t>();
  s.map = map_from_json(j.at("map"));
  for (const auto& o : j.at("observations")) s.observations.push_back(observation_from_flat(o.get<std::vector<double>>()));
  const auto& adv = j.at("advantages");
  const auto& feas = j.at("feasible");
  if (adv.size() != feas.size() || adv.size() != s.observations.size() || adv.size() != s.map.sensors.size())
    throw DimensionMismatch("sample " + std::to_string(s.map_id) + ": node counts disagree");
  for (std::size_t i = 0; i < adv.size(); ++i)
    s.labels.push_back({adv[i].get<std::vector<double>>(), feas[i].get<std::vector<bool>>()});
  s.expert_length = j.at("expert_length").get<double>();
  s.los = j.at("los").get<bool>();
  return s;
}

}  // namespace

double AdvantageLabel::min_feasible() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k)
    if (feasible[k]) m = std::min(m, values[k]);
  return m;
}

AdvantageLabel advantage_labels(const CostToGoField& f, Vec2 p, int K, double delta) {
  if (K < 1) throw ConfigError("advantage_labels: K must be >= 1");
  const double here = f.cost_to_go(p);
  AdvantageLabel out;
  out.values.resize(static_cast<std::size_t>(K));
  out.feasible.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const Vec2 q = p + direction(k, K) * delta;
    const auto idx = static_cast<std::size_t>(k);
    if (f.inflated().segment_free(p, q)) {
      out.values[idx] = f.cost_to_go(q) - here;
      out.feasible[idx] = true;
    } else {
      out.values[idx] = 2.0 * delta;
      out.feasible[idx] = false;
    }
  }
  return out;
}

Sample make_sample(const EnvironmentMap& m, std::uint64_t map_id, const DatasetConfig& cfg) {
  const CostToGoField field = build_field(m, cfg.inflation());
  Sample s;
  s.map_id = map_id;
  s.map = m;
  s.observations = render_all(m, cfg.observe);
  for (const auto& p : m.sensors) s.labels.push_back(advantage_labels(field, p, cfg.advantages, cfg.delta));
  s.expert_length = field.cost_to_go(m.robot());
  s.los = segment_free(m, m.robot(), m.target, 0.0);
  return s;
}

Dataset build_dataset(const DatasetConfig& cfg, std::size_t count, unsigned threads, DatasetStats* stats) {
  cfg.world.validate();
  if (cfg.advantages < 2) throw ConfigError("dataset: K must be >= 2");
  if (!(cfg.delta > 0)) throw ConfigError("dataset: delta must be > 0");
  Dataset d;
  d.config = cfg;
  d.samples.resize(count);
  std::vector<std::size_t> attempts(count, 0);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(threads);

  auto one = [&](std::size_t i) {
    WorldConfig wc = config_for_index(cfg.world, i);
    for (int resample = 0;; ++resample) {
      try {
        GenerationStats gs;
        const EnvironmentMap m = generate_map(wc, &gs);
        attempts[i] += static_cast<std::size_t>(gs.map_attempts);
        d.samples[i] = make_sample(m, i, cfg);
        return;
      } catch (const GenerationExhausted&) {
        attempts[i] += static_cast<std::size_t>(wc.map_retries);
        if (resample + 1 >= kResampleLimit) throw;
        wc.seed = derive_seed(wc.seed, {static_cast<std::uint64_t>(resample)});
      }
    }
  };
  auto work = [&](unsigned worker) {
    try {
      for (std::size_t i = worker; i < count; i += threads) one(i);
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

  if (stats) {
    *stats = summarize(d);
    stats->map_attempts = std::accumulate(attempts.begin(), attempts.end(), std::size_t{0});
  }
  return d;
}

DatasetStats summarize(const Dataset& d) {
  DatasetStats st;
  st.maps = d.samples.size();
  st.map_attempts = st.maps;
  st.min_advantage = std::numeric_limits<double>::infinity();
  st.max_feasible_advantage = -std::numeric_limits<double>::infinity();
  for (const auto& s : d.samples) {
    if (s.los) ++st.los_maps;
    for (const auto& l : s.labels) {
      for (std::size_t k = 0; k < l.values.size(); ++k) {
        ++st.labels;
        if (!l.feasible[k]) {
          ++st.infeasible;
          continue;
        }
        st.min_advantage = std::min(st.min_advantage, l.values[k]);
        st.max_feasible_advantage = std::max(st.max_feasible_advantage, l.values[k]);
      }
    }
  }
  return st;
}

nlohmann::json to_json(const DatasetConfig& c) {
  return {{"world", to_json(c.world)},
          {"observe", to_json(c.observe)},
          {"advantages", c.advantages},
          {"delta", c.delta},
          {"inflation", c.inflation()}};
}

void write_dataset(const Dataset& d, std::ostream& os) {
  const nlohmann::json header{{"format", "sensnav-dataset"},
                              {"version", Dataset::kFormatVersion},
                              {"config", to_json(d.config)},
                              {"count", d.samples.size()}};
  os << header.dump() << '\n';
  for (const auto& s : d.samples) os << sample_to_json(s).dump() << '\n';
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset: missing header line");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "sensnav-dataset") throw std::runtime_error("dataset: not a sensnav dataset");
  if (header.value("version", 0) != Dataset::kFormatVersion) throw std::runtime_error("dataset: unsupported version");
  Dataset d;
  const auto& c = header.at("config");
  d.config.world = world_config_from_json(c.at("world"));
  d.config.observe = observe_config_from_json(c.at("observe"));
  d.config.advantages = c.at("advantages").get<int>();
  d.config.delta = c.at("delta").get<double>();
  const auto count = header.at("count").get<std::size_t>();
  d.samples.reserve(count);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    d.samples.push_back(sample_from_json(nlohmann::json::parse(line)));
  }
  if (d.samples.size() != count)
    throw std::runtime_error("dataset: header promises " + std::to_string(count) + " samples, found " +
                             std::to_string(d.samples.size()));
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_dataset(d, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_dataset(is);
}

void TrainConfig::validate() const {
  if (advantages < 2) throw ConfigError("train: K must be >= 2");
  if (minibatch < 1) throw ConfigError("train: minibatch must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(base_lr > 0) || !(decay > 0)) throw ConfigError("train: learning rate and decay must be > 0");
  if (train_fraction < 0 || eval_fraction < 0 || test_fraction < 0 ||
      std::abs(train_fraction + eval_fraction + test_fraction - 1.0) > 1e-9)
    throw ConfigError("train: split fractions must be non-negative and sum to 1");
  if (!(comm_range >= 0)) throw ConfigError("train: comm_range must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"advantages", c.advantages},
          {"minibatch", c.minibatch},
          {"base_lr", c.base_lr},
          {"decay", c.decay},
          {"epochs", c.epochs},
          {"split", {c.train_fraction, c.eval_fraction, c.test_fraction}},
          {"seed", c.seed},
          {"comm_range", range_to_json(c.comm_range)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.advantages = j.value("advantages", c.advantages);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.decay = j.value("decay", c.decay);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("split")) {
    const auto s = j.at("split").get<std::vector<double>>();
    if (s.size() != 3) throw ConfigError("train.split must have three entries");
    c.train_fraction = s[0];
    c.eval_fraction = s[1];
    c.test_fraction = s[2];
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("comm_range")) c.comm_range = range_from_json(j.at("comm_range"));
  return c;
}

Split split_indices(std::size_t n, const TrainConfig& tc) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(tc.seed, {0x5911u}));
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(tc.test_fraction * static_cast<double>(n)));
  const auto n_eval = std::min(n - n_test, static_cast<std::size_t>(std::llround(tc.eval_fraction * static_cast<double>(n))));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                order.begin() + static_cast<std::ptrdiff_t>(n_test + n_eval));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_eval), order.end());
  for (auto* part : {&s.train, &s.eval, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

GraphSample to_graph_sample(const Sample& s, double range) {
  GraphSample g;
  g.inputs = stack_observations(s.observations);
  g.graph = build_comm_graph(s.map.sensors, range);
  const auto k = static_cast<Eigen::Index>(s.labels.front().values.size());
  g.targets.resize(static_cast<Eigen::Index>(s.labels.size()), k);
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    g.targets.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(s.labels[i].values.data(), k);
  return g;
}

std::size_t best_epoch_index(const std::vector<double>& eval_l1) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < eval_l1.size(); ++i)
    if (eval_l1[i] < eval_l1[best]) best = i;
  return best;
}

double mean_abs_error(const PolicyModel& model, const std::vector<const GraphSample*>& samples) {
  double total = 0.0;
  double count = 0.0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::vector<const GraphSample*> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                                samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), start + kChunk)));
    const GraphSample merged = merge_samples(chunk);
    const Tensor2 pred = forward_all(model, merged.inputs, merged.graph);
    total += (pred - merged.targets).cwiseAbs().sum();
    count += static_cast<double>(pred.size());
  }
  return count > 0 ? total / count : 0.0;
}

TrainState train(const Dataset& data, const TrainConfig& tc, const ModelSpec& spec, std::uint64_t init_seed,
                 std::optional<TrainState> resume, const EpochCallback& on_epoch) {
  tc.validate();
  if (data.samples.empty()) throw ConfigError("train: dataset is empty");
  if (data.config.advantages != tc.advantages)
    throw ConfigError("train: dataset K=" + std::to_string(data.config.advantages) + " but config K=" +
                      std::to_string(tc.advantages));
  if (spec.advantages != tc.advantages) throw ConfigError("train: model K differs from train K");
  if (spec.input_width != data.config.observe.width())
    throw ConfigError("train: model input width differs from the dataset observation width");

  std::vector<GraphSample> graphs;
  graphs.reserve(data.samples.size());
  for (const auto& s : data.samples) graphs.push_back(to_graph_sample(s, tc.comm_range));

  const Split split = split_indices(graphs.size(), tc);
  if (split.train.empty()) throw ConfigError("train: train split is empty");
  std::vector<const GraphSample*> eval_set;
  for (const auto i : split.eval.empty() ? split.train : split.eval) eval_set.push_back(&graphs[i]);

  TrainState st;
  if (resume) {
    st = std::move(*resume);
    if (!(st.model.spec == spec)) throw ConfigError("train: resume checkpoint has a different model shape");
  } else {
    st.model = PolicyModel::initialize(spec, init_seed);
    st.optimizer = AdamState::for_model(st.model);
    st.best_model = st.model;
    st.best_optimizer = st.optimizer;
    st.best_eval_l1 = std::numeric_limits<double>::infinity();
  }

  for (int epoch = st.epoch; epoch < tc.epochs; ++epoch) {
    const double lr = scheduled_lr(tc.base_lr, tc.decay, epoch);
    std::vector<std::size_t> order = split.train;
    Rng rng(derive_seed(tc.seed, {0xE90Cu, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);

    double loss_sum = 0.0;
    double node_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.minibatch)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.minibatch));
        std::vector<const GraphSample*> batch;
        double nodes = 0.0;
        for (std::size_t b = start; b < end; ++b) {
          batch.push_back(&graphs[order[b]]);
          nodes += graphs[order[b]].graph.n;
        }
        const LossAndGrads lg = loss_and_grads(st.model, batch);
        optimizer_step(st.model, lg.grads, st.optimizer, lr);
        loss_sum += lg.loss * nodes;
        node_sum += nodes;
      }
    } catch (const NonFiniteLoss& e) {
      throw NonFiniteLoss(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1), epoch + 1);
    }
    if (!st.model.all_finite())
      throw NonFiniteLoss("non-finite parameters at epoch " + std::to_string(epoch + 1), epoch + 1);

    EpochRecord rec{epoch + 1, loss_sum / node_sum, mean_abs_error(st.model, eval_set), lr};
    if (!std::isfinite(rec.eval_l1)) throw NonFiniteLoss("non-finite eval L1", epoch + 1);
    st.history.push_back(rec);
    st.epoch = epoch + 1;
    if (rec.eval_l1 < st.best_eval_l1) {
      st.best_eval_l1 = rec.eval_l1;
      st.best_epoch = rec.epoch;
      st.best_model = st.model;
      st.best_optimizer = st.optimizer;
    }
    if (on_epoch) on_epoch(st, rec);
  }
  return st;
}

namespace {

nlohmann::json history_to_json(const std::vector<EpochRecord>& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : h) arr.push_back({r.epoch, r.train_loss, r.eval_l1, r.lr});
  return arr;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& arr) {
  std::vector<EpochRecord> h;
  for (const auto& r : arr) h.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
  return h;
}

}  // namespace

nlohmann::json checkpoint_to_json(const TrainState& s, const TrainConfig& tc, bool best) {
  nlohmann::json j;
  j["format"] = "sensnav-checkpoint";
  j["version"] = 1;
  j["kind"] = best ? "best" : "latest";
  j["train_config"] = to_json(tc);
  // Shuffles are drawn from derive_seed(seed, epoch), so seed + epoch is the
  // complete RNG state.
  j["rng"] = {{"seed", tc.seed}, {"next_epoch", s.epoch}};
  j["model"] = to_json(best ? s.best_model : s.model);
  j["optimizer"] = to_json(best ? s.best_optimizer : s.optimizer);
  j["epoch"] = best ? s.best_epoch : s.epoch;
  j["best"] = {{"epoch", s.best_epoch}, {"eval_l1", std::isfinite(s.best_eval_l1) ? nlohmann::json(s.best_eval_l1) : nlohmann::json()}};
  if (!best) {
    j["resume"] = {{"best_model", to_json(s.best_model)}, {"best_optimizer", to_json(s.best_optimizer)}};
  }
  j["history"] = history_to_json(s.history);
  return j;
}

TrainState checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "sensnav-checkpoint") throw std::runtime_error("not a sensnav checkpoint");
  TrainState s;
  s.model = model_from_json(j.at("model"));
  s.optimizer = adam_from_json(j.at("optimizer"), s.model);
  s.epoch = j.at("epoch").get<int>();
  s.best_epoch = j.at("best").at("epoch").get<int>();
  const auto& bl = j.at("best").at("eval_l1");
  s.best_eval_l1 = bl.is_null() ? std::numeric_limits<double>::infinity() : bl.get<double>();
  if (j.contains("resume")) {
    s.best_model = model_from_json(j.at("resume").at("best_model"));
    s.best_optimizer = adam_from_json(j.at("resume").at("best_optimizer"), s.best_model);
  } else {
    s.best_model = s.model;
    s.best_optimizer = s.optimizer;
  }
  s.history = history_from_json(j.at("history"));
  if (j.value("kind", "") == "best") s.history.resize(std::min<std::size_t>(s.history.size(), static_cast<std::size_t>(s.epoch)));
  return s;
}

PolicyModel checkpoint_model(const nlohmann::json& j) {
  if (j.value("format", "") != "sensnav-checkpoint") throw std::runtime_error("not a sensnav checkpoint");
  return model_from_json(j.at("model"));
}

}  // namespace sensnav
