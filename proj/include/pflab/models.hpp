#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pflab/autodiff.hpp"
#include "pflab/dataset.hpp"
#include "pflab/linalg.hpp"

namespace pflab {

enum class ModelKind { Gnn, Dnn, Cnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::Gnn;
  int embed_dim = 32;                  // graph-conv width (GNN) / channels (CNN: 16 fixed)
  std::vector<int> hidden_sizes{128, 64};
  int epochs = 1000;
  int batch_size = 64;
  double lr = 1e-3;
  uint64_t seed = 7;

  bool operator==(const ModelSpec&) const = default;
};

// A fitted surrogate plus everything needed to apply it: normalization
// statistics, the graph operator for GNNs, and per-epoch loss curves.
struct TrainedModel {
  ModelSpec spec;
  std::string case_id;
  int n_buses = 0;
  int n_branches = 0;
  int n_features = 0;
  NormStats norm_stats;
  linalg::Matrix v_operator;          // GNN only, empty for the others
  std::vector<ad::TensorPtr> params;  // declaration order, fixed per kind
  std::vector<double> train_loss;     // normalized MSE per epoch
  std::vector<double> val_loss;
  int best_epoch = 0;                 // 1-based epoch whose weights are kept

  int n_targets() const { return n_buses + n_branches; }

  // Raw features in, raw targets out: v_mag per bus then branch P in MW.
  std::vector<double> predict(const linalg::Matrix& x) const;

  // Same prediction split into (per-bus v_mag, per-branch P in MW).
  std::pair<std::vector<double>, std::vector<double>> predict_split(const linalg::Matrix& x) const;
};

// Builds parameters for the spec and fits them to the training split with
// Adam on mean squared error; keeps the best-validation weights.
TrainedModel train(const ModelSpec& spec, const Dataset& ds, const linalg::Matrix& v_operator);

void save_model(const TrainedModel& model, const std::string& path, const Provenance& provenance);
TrainedModel load_model(const std::string& path);

// Fresh Glorot-filled parameters for a spec; exposed for tests.
std::vector<ad::TensorPtr> init_params(const ModelSpec& spec, int n_buses, int n_features,
                                       int n_targets);

// One forward pass over a stacked batch. The input layout depends on kind:
// GNN {batch*n_buses, F} already multiplied by the graph operator,
// DNN {batch, n_buses*F}, CNN {batch, n_buses, F}. Returns {batch, targets}.
ad::TensorPtr model_forward(ad::Tape& tape, const ModelSpec& spec, int n_buses, int n_targets,
                            const std::vector<ad::TensorPtr>& params, const ad::TensorPtr& input,
                            int batch);

}  // namespace pflab
