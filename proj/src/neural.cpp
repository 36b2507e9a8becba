#include "sensnav/neural.hpp"

#include <cmath>

#include "sensnav/errors.hpp"
#include "sensnav/rng.hpp"

namespace sensnav {

namespace {

struct DenseCache {
  Tensor2 input;
  Tensor2 pre;
};

struct GraphCache {
  Tensor2 input;
  Tensor2 aggregated;
  Tensor2 pre;
};

struct ForwardCache {
  std::vector<DenseCache> encoder;
  std::vector<GraphCache> gnn;
  std::vector<DenseCache> head;
};

Tensor2 activate(const Tensor2& pre, Activation a) {
  switch (a) {
    case Activation::ReLU:
      return pre.cwiseMax(0.0);
    case Activation::Identity:
      return pre;
    case Activation::Sigmoid:
      return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
  }
  return pre;
}

// grad <- grad * sigma'(pre)
void activation_backward(Tensor2& grad, const Tensor2& pre, Activation a) {
  switch (a) {
    case Activation::ReLU:
      grad = (pre.array() > 0.0).select(grad, 0.0);
      return;
    case Activation::Identity:
      return;
    case Activation::Sigmoid: {
      const Eigen::ArrayXXd s = 1.0 / (1.0 + (-pre.array()).exp());
      grad.array() *= s * (1.0 - s);
      return;
    }
  }
}

void check_width(const Tensor2& x, Eigen::Index width, const char* where) {
  if (x.cols() != width)
    throw DimensionMismatch(std::string(where) + ": expected width " + std::to_string(width) + ", got " +
                            std::to_string(x.cols()));
}

Tensor2 dense_forward(const DenseLayer& layer, const Tensor2& in, bool activated, Activation a,
                      std::vector<DenseCache>* cache) {
  Tensor2 pre(in.rows(), layer.weight.cols());
  pre.noalias() = in * layer.weight;
  pre.rowwise() += layer.bias.row(0);
  Tensor2 out = activated ? activate(pre, a) : pre;
  if (cache) cache->push_back({in, std::move(pre)});
  return out;
}

Tensor2 run_encoder(const PolicyModel& model, const Tensor2& inputs, ForwardCache* cache) {
  check_width(inputs, model.spec.input_width, "encode");
  Tensor2 x = inputs;
  for (const auto& layer : model.encoder)
    x = dense_forward(layer, x, true, model.spec.activation, cache ? &cache->encoder : nullptr);
  return x;
}

Tensor2 run_gnn(const PolicyModel& model, const Tensor2& features, const CommGraph& g, ForwardCache* cache) {
  check_width(features, model.spec.feature_width, "gnn_forward");
  if (features.rows() != g.n)
    throw DimensionMismatch("gnn_forward: " + std::to_string(features.rows()) + " feature rows for a graph of " +
                            std::to_string(g.n) + " nodes");
  Tensor2 x = features;
  for (const auto& layer : model.gnn) {
    Tensor2 agg = neighbor_sum(x, g);
    Tensor2 pre(x.rows(), layer.self_weight.cols());
    pre.noalias() = x * layer.self_weight;
    pre.noalias() += agg * layer.neighbor_weight;
    Tensor2 out = activate(pre, model.spec.activation);
    if (cache) cache->gnn.push_back({std::move(x), std::move(agg), std::move(pre)});
    x = std::move(out);
  }
  return x;
}

Tensor2 run_head(const PolicyModel& model, const Tensor2& fused, ForwardCache* cache) {
  check_width(fused, model.spec.fused_width(), "head");
  Tensor2 x = fused;
  for (std::size_t i = 0; i < model.head.size(); ++i) {
    const bool hidden = i + 1 < model.head.size();
    x = dense_forward(model.head[i], x, hidden, model.spec.activation, cache ? &cache->head : nullptr);
  }
  return x;
}

// Propagates grad (w.r.t. the layer output) back through a dense layer.
Tensor2 dense_backward(const DenseLayer& layer, const DenseCache& c, Tensor2 grad, bool activated, Activation a,
                       DenseLayer& out) {
  if (activated) activation_backward(grad, c.pre, a);
  out.weight.noalias() += c.input.transpose() * grad;
  out.bias += grad.colwise().sum();
  Tensor2 din(grad.rows(), layer.weight.rows());
  din.noalias() = grad * layer.weight.transpose();
  return din;
}

Tensor2 neighbor_sum_transpose(const Tensor2& grad, const CommGraph& g) {
  Tensor2 out = Tensor2::Zero(grad.rows(), grad.cols());
  for (int i = 0; i < g.n; ++i)
    for (const int j : g.neighbors[i]) out.row(j) += grad.row(i);
  return out;
}

void fill_uniform(Tensor2& t, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
}

DenseLayer make_dense(int in, int out) { return {Tensor2::Zero(in, out), Tensor2::Zero(1, out)}; }

nlohmann::json tensor_to_json(const Tensor2& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::vector<double>(t.data(), t.data() + t.size())}};
}

void tensor_from_json(const nlohmann::json& j, Tensor2& t) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows != t.rows() || cols != t.cols()) throw DimensionMismatch("checkpoint tensor shape mismatch");
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != t.size()) throw DimensionMismatch("checkpoint tensor size mismatch");
  std::copy(data.begin(), data.end(), t.data());
}

nlohmann::json parameters_to_json(const PolicyModel& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto* p : m.parameters()) arr.push_back(tensor_to_json(*p));
  return arr;
}

void parameters_from_json(const nlohmann::json& arr, PolicyModel& m) {
  auto params = m.parameters();
  if (arr.size() != params.size()) throw DimensionMismatch("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) tensor_from_json(arr[i], *params[i]);
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Identity:
      return "identity";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

void ModelSpec::validate() const {
  auto positive = [](int v) { return v > 0; };
  if (!positive(input_width) || !positive(feature_width) || !positive(advantages))
    throw ConfigError("model: widths must be positive");
  if (gnn_layers < 0) throw ConfigError("model: gnn_layers must be >= 0");
  if (gnn_layers > 0 && !positive(gnn_width)) throw ConfigError("model: gnn_width must be positive");
  for (const int w : encoder_hidden)
    if (!positive(w)) throw ConfigError("model: encoder widths must be positive");
  for (const int w : head_hidden)
    if (!positive(w)) throw ConfigError("model: head widths must be positive");
}

PolicyModel PolicyModel::zeros(const ModelSpec& spec) {
  spec.validate();
  PolicyModel m;
  m.spec = spec;
  int in = spec.input_width;
  for (const int w : spec.encoder_hidden) {
    m.encoder.push_back(make_dense(in, w));
    in = w;
  }
  m.encoder.push_back(make_dense(in, spec.feature_width));
  in = spec.feature_width;
  for (int l = 0; l < spec.gnn_layers; ++l) {
    m.gnn.push_back({Tensor2::Zero(in, spec.gnn_width), Tensor2::Zero(in, spec.gnn_width)});
    in = spec.gnn_width;
  }
  for (const int w : spec.head_hidden) {
    m.head.push_back(make_dense(in, w));
    in = w;
  }
  m.head.push_back(make_dense(in, spec.advantages));
  return m;
}

PolicyModel PolicyModel::initialize(const ModelSpec& spec, std::uint64_t seed) {
  PolicyModel m = zeros(spec);
  Rng rng(seed);
  for (auto& layer : m.encoder) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.weight.rows()));
    fill_uniform(layer.weight, bound, rng);
    fill_uniform(layer.bias, bound, rng);
  }
  for (auto& layer : m.gnn) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.self_weight.rows()));
    fill_uniform(layer.self_weight, bound, rng);
    fill_uniform(layer.neighbor_weight, bound, rng);
  }
  for (auto& layer : m.head) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.weight.rows()));
    fill_uniform(layer.weight, bound, rng);
    fill_uniform(layer.bias, bound, rng);
  }
  return m;
}

std::vector<Tensor2*> PolicyModel::parameters() {
  std::vector<Tensor2*> out;
  for (auto& l : encoder) out.insert(out.end(), {&l.weight, &l.bias});
  for (auto& l : gnn) out.insert(out.end(), {&l.self_weight, &l.neighbor_weight});
  for (auto& l : head) out.insert(out.end(), {&l.weight, &l.bias});
  return out;
}

std::vector<const Tensor2*> PolicyModel::parameters() const {
  std::vector<const Tensor2*> out;
  for (const auto& l : encoder) out.insert(out.end(), {&l.weight, &l.bias});
  for (const auto& l : gnn) out.insert(out.end(), {&l.self_weight, &l.neighbor_weight});
  for (const auto& l : head) out.insert(out.end(), {&l.weight, &l.bias});
  return out;
}

std::size_t PolicyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

bool PolicyModel::all_finite() const {
  for (const auto* p : parameters())
    if (!p->allFinite()) return false;
  return true;
}

PolicyModel zeros_like(const PolicyModel& model) { return PolicyModel::zeros(model.spec); }

Tensor2 stack_observations(const std::vector<Observation>& obs) {
  if (obs.empty()) return Tensor2(0, 0);
  const auto width = static_cast<Eigen::Index>(obs.front().rays.size() * kRayFeatures);
  Tensor2 out(static_cast<Eigen::Index>(obs.size()), width);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto flat = obs[i].flatten();
    if (static_cast<Eigen::Index>(flat.size()) != width) throw DimensionMismatch("observations differ in ray count");
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(flat.data(), width);
  }
  return out;
}

Tensor2 neighbor_sum(const Tensor2& x, const CommGraph& g) {
  Tensor2 out = Tensor2::Zero(x.rows(), x.cols());
  for (int i = 0; i < g.n; ++i)
    for (const int j : g.neighbors[i]) out.row(i) += x.row(j);
  return out;
}

Tensor2 encode(const PolicyModel& model, const Tensor2& inputs) { return run_encoder(model, inputs, nullptr); }

Eigen::RowVectorXd encode(const PolicyModel& model, const Observation& obs) {
  return encode(model, stack_observations({obs})).row(0);
}

Tensor2 gnn_forward(const PolicyModel& model, const Tensor2& features, const CommGraph& g) {
  return run_gnn(model, features, g, nullptr);
}

Tensor2 head(const PolicyModel& model, const Tensor2& fused) { return run_head(model, fused, nullptr); }

Tensor2 forward_all(const PolicyModel& model, const Tensor2& inputs, const CommGraph& g) {
  return head(model, gnn_forward(model, encode(model, inputs), g));
}

Tensor2 forward_all(const PolicyModel& model, const std::vector<Observation>& obs, const CommGraph& g) {
  return forward_all(model, stack_observations(obs), g);
}

GraphSample merge_samples(const std::vector<const GraphSample*>& batch) {
  if (batch.empty()) throw DimensionMismatch("empty batch");
  Eigen::Index rows = 0;
  for (const auto* s : batch) {
    if (s->inputs.rows() != s->graph.n || s->targets.rows() != s->graph.n)
      throw DimensionMismatch("sample node counts disagree");
    rows += s->inputs.rows();
  }
  const auto in_w = batch.front()->inputs.cols();
  const auto k = batch.front()->targets.cols();
  GraphSample out;
  out.inputs.resize(rows, in_w);
  out.targets.resize(rows, k);
  out.graph.n = static_cast<int>(rows);
  out.graph.range = batch.front()->graph.range;
  out.graph.neighbors.resize(static_cast<std::size_t>(rows));
  Eigen::Index offset = 0;
  for (const auto* s : batch) {
    if (s->inputs.cols() != in_w || s->targets.cols() != k) throw DimensionMismatch("sample widths disagree");
    out.inputs.middleRows(offset, s->inputs.rows()) = s->inputs;
    out.targets.middleRows(offset, s->targets.rows()) = s->targets;
    for (int i = 0; i < s->graph.n; ++i) {
      auto& nb = out.graph.neighbors[static_cast<std::size_t>(offset + i)];
      for (const int j : s->graph.neighbors[i]) nb.push_back(static_cast<int>(offset) + j);
    }
    offset += s->inputs.rows();
  }
  return out;
}

namespace {

double squared_error_mean(const Tensor2& pred, const Tensor2& targets) {
  if (pred.cols() != targets.cols()) throw DimensionMismatch("target width differs from the model's K");
  const double loss = (pred - targets).squaredNorm() / static_cast<double>(pred.rows());
  if (!std::isfinite(loss)) throw NonFiniteLoss("non-finite loss");
  return loss;
}

}  // namespace

double loss_only(const PolicyModel& model, const std::vector<const GraphSample*>& batch) {
  const GraphSample merged = merge_samples(batch);
  return squared_error_mean(forward_all(model, merged.inputs, merged.graph), merged.targets);
}

LossAndGrads loss_and_grads(const PolicyModel& model, const std::vector<GraphSample>& batch) {
  std::vector<const GraphSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_and_grads(model, ptrs);
}

LossAndGrads loss_and_grads(const PolicyModel& model, const std::vector<const GraphSample*>& batch) {
  const GraphSample merged = merge_samples(batch);
  if (merged.targets.cols() != model.spec.advantages) throw DimensionMismatch("target width differs from K");

  ForwardCache cache;
  const Tensor2 features = run_encoder(model, merged.inputs, &cache);
  const Tensor2 fused = run_gnn(model, features, merged.graph, &cache);
  const Tensor2 pred = run_head(model, fused, &cache);
  if (!pred.allFinite()) throw NonFiniteLoss("non-finite network output");

  LossAndGrads out{squared_error_mean(pred, merged.targets), zeros_like(model)};
  const Activation act = model.spec.activation;

  Tensor2 grad = (pred - merged.targets) * (2.0 / static_cast<double>(pred.rows()));
  for (std::size_t i = model.head.size(); i-- > 0;) {
    const bool hidden = i + 1 < model.head.size();
    grad = dense_backward(model.head[i], cache.head[i], std::move(grad), hidden, act, out.grads.head[i]);
  }
  for (std::size_t l = model.gnn.size(); l-- > 0;) {
    const auto& layer = model.gnn[l];
    const auto& c = cache.gnn[l];
    auto& gl = out.grads.gnn[l];
    activation_backward(grad, c.pre, act);
    gl.self_weight.noalias() += c.input.transpose() * grad;
    gl.neighbor_weight.noalias() += c.aggregated.transpose() * grad;
    Tensor2 through_neighbors(grad.rows(), layer.neighbor_weight.rows());
    through_neighbors.noalias() = grad * layer.neighbor_weight.transpose();
    Tensor2 din(grad.rows(), layer.self_weight.rows());
    din.noalias() = grad * layer.self_weight.transpose();
    din += neighbor_sum_transpose(through_neighbors, merged.graph);
    grad = std::move(din);
  }
  for (std::size_t i = model.encoder.size(); i-- > 0;)
    grad = dense_backward(model.encoder[i], cache.encoder[i], std::move(grad), true, act, out.grads.encoder[i]);
  return out;
}

AdamState AdamState::for_model(const PolicyModel& model) {
  AdamState s;
  s.first = zeros_like(model);
  s.second = zeros_like(model);
  return s;
}

void optimizer_step(PolicyModel& model, const PolicyModel& grads, AdamState& state, double lr) {
  if (!(grads.spec == model.spec) || !(state.first.spec == model.spec))
    throw DimensionMismatch("optimizer_step: shapes differ");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto params = model.parameters();
  const auto g = grads.parameters();
  auto m = state.first.parameters();
  auto v = state.second.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i]->array() = state.beta1 * m[i]->array() + (1.0 - state.beta1) * g[i]->array();
    v[i]->array() = state.beta2 * v[i]->array() + (1.0 - state.beta2) * g[i]->array().square();
    params[i]->array() -=
        lr * (m[i]->array() / bc1) / ((v[i]->array() / bc2).sqrt() + state.epsilon);
  }
}

double scheduled_lr(double base_lr, double decay, int epoch) { return base_lr * std::pow(decay, epoch); }

nlohmann::json to_json(const ModelSpec& s) {
  return {{"input_width", s.input_width},   {"encoder_hidden", s.encoder_hidden}, {"feature_width", s.feature_width},
          {"gnn_width", s.gnn_width},       {"gnn_layers", s.gnn_layers},         {"head_hidden", s.head_hidden},
          {"advantages", s.advantages},     {"activation", to_string(s.activation)}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j, ModelSpec s) {
  s.input_width = j.value("input_width", s.input_width);
  s.encoder_hidden = j.value("encoder_hidden", s.encoder_hidden);
  s.feature_width = j.value("feature_width", s.feature_width);
  s.gnn_width = j.value("gnn_width", s.gnn_width);
  s.gnn_layers = j.value("gnn_layers", s.gnn_layers);
  s.head_hidden = j.value("head_hidden", s.head_hidden);
  s.advantages = j.value("advantages", s.advantages);
  if (j.contains("activation")) s.activation = activation_from_string(j.at("activation").get<std::string>());
  return s;
}

nlohmann::json to_json(const PolicyModel& m) {
  return {{"spec", to_json(m.spec)}, {"parameters", parameters_to_json(m)}};
}

PolicyModel model_from_json(const nlohmann::json& j) {
  PolicyModel m = PolicyModel::zeros(model_spec_from_json(j.at("spec")));
  parameters_from_json(j.at("parameters"), m);
  if (!m.all_finite()) throw NonFiniteLoss("checkpoint holds non-finite parameters");
  return m;
}

nlohmann::json to_json(const AdamState& s) {
  return {{"step", s.step},
          {"beta1", s.beta1},
          {"beta2", s.beta2},
          {"epsilon", s.epsilon},
          {"first", parameters_to_json(s.first)},
          {"second", parameters_to_json(s.second)}};
}

AdamState adam_from_json(const nlohmann::json& j, const PolicyModel& like) {
  AdamState s = AdamState::for_model(like);
  s.step = j.at("step").get<std::int64_t>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  parameters_from_json(j.at("first"), s.first);
  parameters_from_json(j.at("second"), s.second);
  return s;
}

}  // namespace sensnav
