#pragma once
// Dense policy network: encoder MLP -> L graph-convolution layers -> head MLP.
//
// Row-vector convention throughout: a layer computes x * W (+ b). Node
// features of one or more graphs are stacked as rows of a Tensor2, and a
// batch of graphs is a single block-diagonal CommGraph over the stacked rows.
//
// Graph convolution layer:
//   x_i' = sigma( x_i * W_self + sum_{j in N(i)} x_j * W_neighbor )
// with no bias term. Gradients are hand-derived reverse mode.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sensnav/observe.hpp"

namespace sensnav {

using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { ReLU, Identity, Sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ModelSpec {
  int input_width = 64 * kRayFeatures;
  std::vector<int> encoder_hidden{256, 128};
  int feature_width = 64;
  int gnn_width = 256;
  int gnn_layers = 1;
  std::vector<int> head_hidden{128, 64, 64, 64};
  int advantages = 8;
  Activation activation = Activation::ReLU;

  int fused_width() const { return gnn_layers > 0 ? gnn_width : feature_width; }
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct DenseLayer {
  Tensor2 weight;  // in x out
  Tensor2 bias;    // 1 x out
};

struct GraphConvLayer {
  Tensor2 self_weight;      // in x out
  Tensor2 neighbor_weight;  // in x out
};

struct PolicyModel {
  ModelSpec spec;
  std::vector<DenseLayer> encoder;
  std::vector<GraphConvLayer> gnn;
  std::vector<DenseLayer> head;

  /// Weights and biases ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), seeded.
  static PolicyModel initialize(const ModelSpec& spec, std::uint64_t seed);
  static PolicyModel zeros(const ModelSpec& spec);

  /// Fixed order: encoder (W, b)..., gnn (W_self, W_neighbor)..., head (W, b)...
  std::vector<Tensor2*> parameters();
  std::vector<const Tensor2*> parameters() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Model with the same shapes as `model`, all zeros. Used as a gradient set.
PolicyModel zeros_like(const PolicyModel& model);

/// Stack per-node observations into an n x input_width matrix.
Tensor2 stack_observations(const std::vector<Observation>& obs);

Tensor2 encode(const PolicyModel& model, const Tensor2& inputs);
Eigen::RowVectorXd encode(const PolicyModel& model, const Observation& obs);
Tensor2 gnn_forward(const PolicyModel& model, const Tensor2& features, const CommGraph& g);
Tensor2 head(const PolicyModel& model, const Tensor2& fused);
Tensor2 forward_all(const PolicyModel& model, const Tensor2& inputs, const CommGraph& g);
Tensor2 forward_all(const PolicyModel& model, const std::vector<Observation>& obs, const CommGraph& g);

/// Row i of the result is the sum of rows N(i) of x.
Tensor2 neighbor_sum(const Tensor2& x, const CommGraph& g);

struct GraphSample {
  Tensor2 inputs;   // n x input_width
  CommGraph graph;  // n nodes
  Tensor2 targets;  // n x K
};

struct LossAndGrads {
  double loss = 0.0;
  PolicyModel grads;
};

/// Mean over all nodes of the batch of the squared L2 error, with gradients.
LossAndGrads loss_and_grads(const PolicyModel& model, const std::vector<const GraphSample*>& batch);
LossAndGrads loss_and_grads(const PolicyModel& model, const std::vector<GraphSample>& batch);

/// Same loss without gradients.
double loss_only(const PolicyModel& model, const std::vector<const GraphSample*>& batch);

/// Concatenate graphs into one block-diagonal sample.
GraphSample merge_samples(const std::vector<const GraphSample*>& batch);

struct AdamState {
  PolicyModel first;
  PolicyModel second;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_model(const PolicyModel& model);
};

/// One bias-corrected Adam update in place.
void optimizer_step(PolicyModel& model, const PolicyModel& grads, AdamState& state, double lr);

double scheduled_lr(double base_lr, double decay, int epoch);

nlohmann::json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const nlohmann::json& j, ModelSpec base = {});
nlohmann::json to_json(const PolicyModel& m);
PolicyModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j, const PolicyModel& like);

}  // namespace sensnav
