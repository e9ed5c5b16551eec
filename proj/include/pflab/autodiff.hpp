#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pflab/rng.hpp"

namespace pflab::ad {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;

  int size() const {
    int s = 1;
    for (int d : shape) s *= d;
    return s;
  }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data,
                      bool requires_grad = false);

// Records each op; backward() replays the records in reverse. Gradients of
// intermediate (tape-produced) tensors are reset on every backward() call,
// gradients of leaf tensors accumulate until the caller zeroes them.
class Tape {
 public:
  // a{r,k} x b{k,c} -> {r,c}
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  // Elementwise when shapes match; {n} or {1,n} b broadcasts over rows of a{r,n}.
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  // Row-broadcast add only; backward sums the bias gradient over rows.
  TensorPtr add_bias(const TensorPtr& a, const TensorPtr& bias);
  TensorPtr relu(const TensorPtr& a);
  TensorPtr reshape(const TensorPtr& a, std::vector<int> shape);
  // a{len,c_in} * w{3,c_in,c_out} + bias{c_out} -> {len,c_out};
  // kernel width 3, zero padded so the length is preserved. A rank-3
  // a{batch,len,c_in} convolves each sample independently.
  TensorPtr conv1d(const TensorPtr& a, const TensorPtr& w, const TensorPtr& bias);
  // Mean of squared differences over all elements -> {1}.
  TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target);

  void backward(const TensorPtr& loss);
  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;

  TensorPtr emit(std::vector<int> shape, std::vector<double> data, bool track,
                 std::function<void()> pull);
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One update over `params` from their accumulated gradients; zeroes the
// gradients afterwards. Moment buffers are allocated on the first call.
void adam_step(std::vector<TensorPtr>& params, AdamState& state);

// Uniform Glorot fill: U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
void glorot_fill(Tensor& t, int fan_in, int fan_out, Rng& rng);

}  // namespace pflab::ad
