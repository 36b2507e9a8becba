// sensnav: dataset generation, training, evaluation, sweeps and plots.
//
//   sensnav gen   --count 2000 --out data.jsonl
//   sensnav train --dataset data.jsonl --out model.json --ds inf
//   sensnav eval  --checkpoint model.json --maps 250 --ds 0 --report report.json
//   sensnav sweep --checkpoint model.json --param ds --values 0,1,2,inf --out sweep.csv
//   sensnav plot  --trace traces/000003.json --out episode.svg
//
// Exit status: 0 ok, 1 runtime failure, 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sensnav/errors.hpp"
#include "sensnav/experiment.hpp"
#include "sensnav/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sensnav;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;

  std::size_t count = 0;
  std::string out;
  std::string dataset;
  std::optional<int> epochs;
  std::string ds;
  std::optional<int> layers;
  std::optional<int> advantages;
  std::string resume;
  std::string history;
  std::string checkpoint;
  std::string maps = "250";
  std::string report;
  bool expert = false;
  bool greedy = false;
  std::string trace_dir;
  std::string param;
  std::vector<std::string> values;
  std::string map;
  std::size_t map_index = 0;
  std::string trace;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_range(const std::string& s) {
  try {
    return range_from_json(json(s));
  } catch (const std::exception&) {
    throw UsageError("not a range: '" + s + "'");
  }
}

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment(o.config);
  if (o.greedy) c.rollout.greedy = true;
  if (o.seed) {
    c.world.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.layers) c.model.gnn_layers = *o.layers;
  if (o.advantages) {
    c.train.advantages = *o.advantages;
    c.model.advantages = *o.advantages;
  }
  c.validate();
  return c;
}

unsigned thread_count(const Options& o) {
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_text(const std::string& path, const std::string& text) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path);
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// gen ------------------------------------------------------------------------

int cmd_gen(const Options& o) {
  if (o.count == 0) throw UsageError("--count must be >= 1");
  const auto cfg = resolve(o);
  const auto out = o.out.empty() ? cfg.io.dataset : o.out;
  DatasetStats stats;
  const auto data = build_dataset(cfg.dataset_config(), o.count, thread_count(o), &stats);

  std::size_t bad = 0;
  for (const auto& s : data.samples) {
    for (const auto& v : validate_map(s.map, cfg.world)) {
      if (bad++ < 10) std::cerr << "map " << s.map_id << ": " << describe(v) << "\n";
    }
  }
  save_dataset(data, out);

  std::cout << "wrote " << out << "\n"
            << "  maps           " << stats.maps << " (" << stats.map_attempts << " attempts, "
            << stats.map_attempts - stats.maps << " rejected)\n"
            << "  LOS maps       " << stats.los_maps << "\n"
            << "  labels         " << stats.labels << " (" << stats.infeasible << " infeasible)\n"
            << "  advantage min  " << fmt(stats.min_advantage) << "\n"
            << "  feasible max   " << fmt(stats.max_feasible_advantage) << "\n";
  if (bad) {
    std::cerr << bad << " constraint violations\n";
    return 1;
  }
  return 0;
}

// train ----------------------------------------------------------------------

void check_dataset(const Dataset& d, const ExperimentConfig& c) {
  if (d.config.advantages != c.train.advantages)
    throw ConfigError("dataset has K=" + std::to_string(d.config.advantages) + " but config has K=" +
                      std::to_string(c.train.advantages));
  if (d.config.observe.width() != c.model.input_width)
    throw ConfigError("dataset observation width " + std::to_string(d.config.observe.width()) +
                      " != model input width " + std::to_string(c.model.input_width));
}

int cmd_train(const Options& o) {
  auto cfg = resolve(o);
  if (!o.ds.empty()) cfg.train.comm_range = parse_range(o.ds);
  const auto dataset_path = o.dataset.empty() ? cfg.io.dataset : o.dataset;
  const auto out = o.out.empty() ? cfg.io.checkpoint : o.out;
  const auto last = out + ".last";
  const auto history = o.history.empty() ? (fs::path(out).replace_extension(".history.csv")).string() : o.history;

  const auto data = load_dataset(dataset_path);
  check_dataset(data, cfg);

  std::optional<TrainState> resume;
  if (!o.resume.empty()) {
    const auto j = read_json(o.resume);
    if (j.value("kind", "") != "latest")
      throw ConfigError(o.resume + " is a best-epoch snapshot; resume from the .last checkpoint");
    resume = checkpoint_from_json(j);
  }

  const json echo = {{"experiment", to_json(cfg)}, {"dataset", dataset_path}, {"dataset_size", data.samples.size()}};
  auto save = [&](const TrainState& s, bool best, const std::string& path) {
    auto j = checkpoint_to_json(s, cfg.train, best);
    j["config"] = echo;
    write_text(path, j.dump());
  };

  std::cout << "training on " << data.samples.size() << " maps, D_S="
            << (std::isinf(cfg.train.comm_range) ? std::string("inf") : fmt(cfg.train.comm_range))
            << ", L=" << cfg.model.gnn_layers << ", K=" << cfg.train.advantages << "\n";
  const auto state = train(data, cfg.train, cfg.model, cfg.model_seed, resume,
                           [&](const TrainState& s, const EpochRecord& r) {
                             std::printf("epoch %4d  train %.6f  eval_l1 %.6f  lr %.3g%s\n", r.epoch, r.train_loss,
                                         r.eval_l1, r.lr, s.best_epoch == r.epoch ? "  *" : "");
                             std::fflush(stdout);
                             if (r.epoch % 10 == 0) save(s, false, last);
                           });
  save(state, true, out);
  save(state, false, last);

  std::ostringstream csv;
  csv << "epoch,train_mse,eval_l1,lr\n" << std::setprecision(17);
  for (const auto& r : state.history) csv << r.epoch << "," << r.train_loss << "," << r.eval_l1 << "," << r.lr << "\n";
  write_text(history, csv.str());
  std::cout << "best epoch " << state.best_epoch << " (eval L1 " << fmt(state.best_eval_l1) << ")\n"
            << "wrote " << out << ", " << last << ", " << history << "\n";
  return 0;
}

// eval / sweep ---------------------------------------------------------------

struct Loaded {
  std::vector<EnvironmentMap> maps;
  std::vector<std::uint64_t> ids;
  json source;
};

Loaded load_maps(const Options& o, const ExperimentConfig& cfg) {
  Loaded l;
  const bool numeric = !o.maps.empty() && std::all_of(o.maps.begin(), o.maps.end(), ::isdigit);
  if (numeric) {
    const auto n = std::stoull(o.maps);
    if (n == 0) throw UsageError("--maps must name a dataset or a count >= 1");
    l.maps = heldout_maps(cfg.world, n, thread_count(o));
    for (std::size_t i = 0; i < n; ++i) l.ids.push_back(i);
    l.source = {{"heldout", n}, {"seed", cfg.world.seed + kHeldOutSeedOffset}};
  } else {
    const auto d = load_dataset(o.maps);
    for (const auto& s : d.samples) {
      l.maps.push_back(s.map);
      l.ids.push_back(s.map_id);
    }
    l.source = {{"dataset", o.maps}, {"count", d.samples.size()}};
  }
  return l;
}

struct Policy {
  std::optional<PolicyModel> model;
  std::optional<double> train_range;
  json source;
};

Policy load_policy(const Options& o, const ExperimentConfig& cfg) {
  Policy p;
  if (o.expert) {
    p.source = "expert";
    return p;
  }
  if (o.checkpoint.empty() && cfg.io.checkpoint.empty()) throw UsageError("--checkpoint or --expert required");
  const auto path = o.checkpoint.empty() ? cfg.io.checkpoint : o.checkpoint;
  const auto j = read_json(path);
  p.model = checkpoint_model(j);
  p.train_range = range_from_json(j.at("train_config").at("comm_range"));
  p.source = {{"checkpoint", path}, {"epoch", j.at("epoch")}, {"train_comm_range", range_to_json(*p.train_range)}};
  return p;
}

// The checkpoint's architecture wins over the config file.
void adopt_model(ExperimentConfig& cfg, const Policy& p) {
  if (!p.model) return;
  cfg.model = p.model->spec;
  cfg.train.advantages = p.model->spec.advantages;
  if (cfg.observe.width() != cfg.model.input_width)
    throw ConfigError("checkpoint input width " + std::to_string(cfg.model.input_width) +
                      " != observation width " + std::to_string(cfg.observe.width()));
}

PredictorFactory make_factory(const Policy& p, const ExperimentConfig& cfg, double comm_range) {
  if (p.model) {
    const PolicyModel* model = &*p.model;
    const auto observe = cfg.observe;
    return [model, observe, comm_range](const EnvironmentMap&) {
      return std::unique_ptr<AdvantagePredictor>(new ModelPredictor(*model, observe, comm_range));
    };
  }
  const double inflation = cfg.world.robot_radius;
  const int K = cfg.train.advantages;
  const double delta = cfg.delta;
  return [inflation, K, delta](const EnvironmentMap& m) {
    return std::unique_ptr<AdvantagePredictor>(new ExpertPredictor(m, inflation, K, delta));
  };
}

MetricsReport run_eval(const Options& o, const ExperimentConfig& cfg, const Policy& p, const Loaded& l,
                       double comm_range, bool traces) {
  RolloutConfig rc = cfg.rollout;
  rc.comm_range = comm_range;
  EvalOptions eo;
  eo.seed = cfg.world.seed + kHeldOutSeedOffset;
  eo.inflation = cfg.world.robot_radius;
  eo.threads = thread_count(o);
  eo.map_ids = l.ids;
  eo.train_comm_range = p.train_range;
  if (traces && !o.trace_dir.empty()) {
    fs::create_directories(o.trace_dir);
    eo.on_trace = [&](std::size_t i, const EnvironmentMap& m, const EpisodeTrace& t) {
      const auto field = build_field(m, eo.inflation);
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.json", i);
      write_text((fs::path(o.trace_dir) / name).string(), trace_to_json(m, t, field.shortest_path(m.robot())).dump());
    };
  }
  auto report = evaluate(make_factory(p, cfg, comm_range), l.maps, rc, eo);
  report.config = {{"experiment", to_json(cfg)}, {"policy", p.source}, {"maps", l.source}};
  return report;
}

int cmd_eval(const Options& o) {
  auto cfg = resolve(o);
  const double range = o.ds.empty() ? cfg.rollout.comm_range : parse_range(o.ds);
  const auto policy = load_policy(o, cfg);
  adopt_model(cfg, policy);
  const auto maps = load_maps(o, cfg);
  const auto report = run_eval(o, cfg, policy, maps, range, true);
  const auto table = format_table(report);
  std::cout << table;
  const auto out = o.report.empty() ? cfg.io.report : o.report;
  auto j = to_json(report);
  j["table"] = table;
  write_text(out, j.dump(1) + "\n");
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_sweep(const Options& o) {
  auto cfg = resolve(o);
  if (o.param != "ds" && o.param != "n_sensors") throw UsageError("--param must be ds or n_sensors");
  if (o.values.empty()) throw UsageError("--values is empty");
  const auto policy = load_policy(o, cfg);
  adopt_model(cfg, policy);
  const auto base = load_maps(o, cfg);
  const double default_range = o.ds.empty() ? cfg.rollout.comm_range : parse_range(o.ds);

  std::ostringstream csv;
  csv << "value,los_success,los_spl,nlos_success,nlos_spl\n" << std::setprecision(17);
  json runs = json::array();
  for (const auto& v : o.values) {
    Loaded l = base;
    double range = default_range;
    if (o.param == "ds") {
      range = parse_range(v);
    } else {
      int n = 0;
      try {
        n = std::stoi(v);
      } catch (const std::exception&) {
        throw UsageError("not a sensor count: '" + v + "'");
      }
      if (n < 1) throw UsageError("n_sensors must be >= 1");
      for (auto& m : l.maps) m.sensors.resize(std::min<std::size_t>(m.sensors.size(), static_cast<std::size_t>(n)));
    }
    const auto r = run_eval(o, cfg, policy, l, range, false);
    std::cout << o.param << "=" << v << "\n" << format_table(r);
    csv << v << "," << r.los.success << "," << r.los.spl << "," << r.nlos.success << "," << r.nlos.spl << "\n";
    runs.push_back({{"value", v}, {"aggregate", to_json(r).at("aggregate")}});
  }
  const auto out = o.out.empty() ? std::string("sweep.csv") : o.out;
  write_text(out, csv.str());
  const json echo = {{"experiment", to_json(cfg)}, {"policy", policy.source}, {"maps", base.source},
                     {"param", o.param},           {"values", o.values},      {"runs", runs}};
  write_text(out + ".json", echo.dump(1) + "\n");
  std::cout << "wrote " << out << "\n";
  return 0;
}

// plot -----------------------------------------------------------------------

std::vector<Vec2> points(const json& arr) {
  std::vector<Vec2> out;
  for (const auto& p : arr) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

int cmd_plot(const Options& o) {
  if (o.map.empty() == o.trace.empty()) throw UsageError("give exactly one of --map or --trace");
  if (o.out.empty()) throw UsageError("--out is required");
  std::string svg;
  try {
    if (!o.trace.empty()) {
      const auto j = read_json(o.trace);
      svg = render_svg(map_from_json(j.at("map")), points(j.at("expert_path")), points(j.at("positions")));
    } else {
      EnvironmentMap m;
      if (fs::path(o.map).extension() == ".jsonl") {
        const auto d = load_dataset(o.map);
        if (o.map_index >= d.samples.size()) throw UsageError("--index out of range");
        m = d.samples[o.map_index].map;
      } else {
        m = map_from_json(read_json(o.map));
      }
      svg = render_svg(m, {}, {});
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("parse error: ") + e.what());
  }
  write_text(o.out, svg);
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sensor-network guided navigation: gen, train, eval, sweep, plot"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "experiment JSON; flags override it")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "seed for generation, training and evaluation");
  app.add_option("--threads", o.threads, "worker cap (default: all cores)");

  auto* gen = app.add_subcommand("gen", "generate a dataset of maps and labels");
  gen->add_option("--count", o.count, "number of maps")->required();
  gen->add_option("--out", o.out, "dataset path (.jsonl)");

  auto* tr = app.add_subcommand("train", "train a policy on a dataset");
  tr->add_option("--dataset", o.dataset);
  tr->add_option("--out", o.out, "best checkpoint; the latest state goes to <out>.last");
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--ds", o.ds, "communication range for training graphs (number or inf)");
  tr->add_option("--layers", o.layers, "graph convolution layers L");
  tr->add_option("--advantages", o.advantages, "number of headings K");
  tr->add_option("--resume", o.resume, "continue from a .last checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--history", o.history, "per-epoch CSV");

  auto* ev = app.add_subcommand("eval", "closed-loop evaluation");
  auto* sw = app.add_subcommand("sweep", "evaluate over a range of D_S or sensor counts");
  for (auto* sub : {ev, sw}) {
    sub->add_option("--checkpoint", o.checkpoint);
    sub->add_flag("--expert", o.expert, "use ground-truth advantages instead of a model");
    sub->add_flag("--greedy", o.greedy, "take the argmin heading instead of sampling");
    sub->add_option("--maps", o.maps, "dataset file, or a count of held-out maps")->capture_default_str();
    sub->add_option("--ds", o.ds, "evaluation communication range (number or inf)");
    sub->add_option("--advantages", o.advantages, "number of headings K");
  }
  ev->add_option("--report", o.report);
  ev->add_option("--trace-dir", o.trace_dir, "write one trace JSON per episode");
  sw->add_option("--param", o.param)->required();
  sw->add_option("--values", o.values)->required()->delimiter(',');
  sw->add_option("--out", o.out, "CSV path; the resolved config goes to <out>.json");

  auto* pl = app.add_subcommand("plot", "render a map or episode trace as SVG");
  pl->add_option("--map", o.map, "map JSON or dataset .jsonl");
  pl->add_option("--index", o.map_index, "sample index when --map is a dataset");
  pl->add_option("--trace", o.trace);
  pl->add_option("--out", o.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*sw) return cmd_sweep(o);
    if (*pl) return cmd_plot(o);
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
