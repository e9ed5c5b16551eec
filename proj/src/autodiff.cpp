#include "pflab/autodiff.hpp"

#include <cmath>
#include <string>

#include "pflab/errors.hpp"

namespace pflab::ad {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

}  // namespace

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data.assign(static_cast<size_t>(t->size()), 0.0);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  if (static_cast<size_t>(t->size()) != data.size())
    throw ShapeMismatch("tensor " + shape_str(t->shape) + " cannot hold " +
                        std::to_string(data.size()) + " values");
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tape::emit(std::vector<int> shape, std::vector<double> data, bool track,
                     std::function<void()> pull) {
  auto out = make_tensor(std::move(shape), std::move(data), track);
  if (track) nodes_.push_back({out, std::move(pull)});
  return out;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->dim(1) != b->dim(0))
    throw ShapeMismatch("matmul " + shape_str(a->shape) + " x " + shape_str(b->shape));
  const int r = a->dim(0), k = a->dim(1), c = b->dim(1);
  std::vector<double> out(static_cast<size_t>(r) * c, 0.0);
  for (int i = 0; i < r; ++i) {
    const double* arow = &a->data[static_cast<size_t>(i) * k];
    double* orow = &out[static_cast<size_t>(i) * c];
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = &b->data[static_cast<size_t>(kk) * c];
      for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
    }
  }
  const bool track = a->requires_grad || b->requires_grad;
  TensorPtr result = emit({r, c}, std::move(out), track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [a, b, out_t, r, k, c]() {
      const std::vector<double>& g = out_t->grad;
      if (a->requires_grad) {
        a->ensure_grad();
        // dA += G * B^T
        for (int i = 0; i < r; ++i) {
          const double* grow = &g[static_cast<size_t>(i) * c];
          double* darow = &a->grad[static_cast<size_t>(i) * k];
          for (int kk = 0; kk < k; ++kk) {
            const double* brow = &b->data[static_cast<size_t>(kk) * c];
            double acc = 0.0;
            for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
            darow[kk] += acc;
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        // dB += A^T * G
        for (int kk = 0; kk < k; ++kk) {
          double* dbrow = &b->grad[static_cast<size_t>(kk) * c];
          for (int i = 0; i < r; ++i) {
            const double av = a->data[static_cast<size_t>(i) * k + kk];
            if (av == 0.0) continue;
            const double* grow = &g[static_cast<size_t>(i) * c];
            for (int j = 0; j < c; ++j) dbrow[j] += av * grow[j];
          }
        }
      }
    };
  }
  return result;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  const bool elementwise = a->shape == b->shape;
  bool broadcast = false;
  int r = 0, c = 0;
  if (!elementwise) {
    const bool b_is_row = (b->shape.size() == 1) ||
                          (b->shape.size() == 2 && b->dim(0) == 1);
    if (a->shape.size() == 2 && b_is_row && b->size() == a->dim(1)) {
      broadcast = true;
      r = a->dim(0);
      c = a->dim(1);
    } else {
      throw ShapeMismatch("add " + shape_str(a->shape) + " + " + shape_str(b->shape));
    }
  }
  std::vector<double> out(a->data);
  if (elementwise) {
    for (size_t i = 0; i < out.size(); ++i) out[i] += b->data[i];
  } else {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] += b->data[j];
  }
  const bool track = a->requires_grad || b->requires_grad;
  TensorPtr result = emit(a->shape, std::move(out), track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [a, b, out_t, elementwise, broadcast, r, c]() {
      (void)broadcast;
      const std::vector<double>& g = out_t->grad;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        if (elementwise) {
          for (size_t i = 0; i < g.size(); ++i) b->grad[i] += g[i];
        } else {
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) b->grad[j] += g[static_cast<size_t>(i) * c + j];
        }
      }
    };
  }
  return result;
}

TensorPtr Tape::add_bias(const TensorPtr& a, const TensorPtr& bias) {
  if (a->shape.size() != 2 || bias->size() != a->dim(1))
    throw ShapeMismatch("add_bias " + shape_str(a->shape) + " + " + shape_str(bias->shape));
  return add(a, bias);
}

TensorPtr Tape::relu(const TensorPtr& a) {
  std::vector<double> out(a->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
  const bool track = a->requires_grad;
  TensorPtr result = emit(a->shape, std::move(out), track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [a, out_t]() {
      a->ensure_grad();
      for (size_t i = 0; i < a->data.size(); ++i)
        if (a->data[i] > 0.0) a->grad[i] += out_t->grad[i];
    };
  }
  return result;
}

TensorPtr Tape::reshape(const TensorPtr& a, std::vector<int> shape) {
  int s = 1;
  for (int d : shape) s *= d;
  if (s != a->size())
    throw ShapeMismatch("reshape " + shape_str(a->shape) + " to " + shape_str(shape));
  const bool track = a->requires_grad;
  TensorPtr result = emit(std::move(shape), a->data, track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [a, out_t]() {
      a->ensure_grad();
      for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out_t->grad[i];
    };
  }
  return result;
}

TensorPtr Tape::conv1d(const TensorPtr& a, const TensorPtr& w, const TensorPtr& bias) {
  const bool batched = a->shape.size() == 3;
  if ((a->shape.size() != 2 && !batched) || w->shape.size() != 3 || w->dim(0) != 3 ||
      w->dim(1) != a->dim(batched ? 2 : 1) || bias->shape.size() != 1 ||
      bias->dim(0) != w->dim(2))
    throw ShapeMismatch("conv1d " + shape_str(a->shape) + " with " + shape_str(w->shape) +
                        " and " + shape_str(bias->shape));
  const int nb = batched ? a->dim(0) : 1;
  const int len = a->dim(batched ? 1 : 0);
  const int cin = w->dim(1), cout = w->dim(2);
  std::vector<double> out(static_cast<size_t>(nb) * len * cout);
  for (int s = 0; s < nb; ++s) {
    const size_t abase = static_cast<size_t>(s) * len * cin;
    const size_t obase = static_cast<size_t>(s) * len * cout;
    for (int t = 0; t < len; ++t) {
      double* orow = &out[obase + static_cast<size_t>(t) * cout];
      for (int o = 0; o < cout; ++o) orow[o] = bias->data[o];
      for (int dt = -1; dt <= 1; ++dt) {
        const int src = t + dt;
        if (src < 0 || src >= len) continue;  // zero padding at sample edges
        const double* arow = &a->data[abase + static_cast<size_t>(src) * cin];
        const double* wslice = &w->data[static_cast<size_t>(dt + 1) * cin * cout];
        for (int ci = 0; ci < cin; ++ci) {
          const double av = arow[ci];
          if (av == 0.0) continue;
          const double* wrow = &wslice[static_cast<size_t>(ci) * cout];
          for (int o = 0; o < cout; ++o) orow[o] += av * wrow[o];
        }
      }
    }
  }
  std::vector<int> out_shape = batched ? std::vector<int>{nb, len, cout}
                                       : std::vector<int>{len, cout};
  const bool track = a->requires_grad || w->requires_grad || bias->requires_grad;
  TensorPtr result = emit(std::move(out_shape), std::move(out), track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [a, w, bias, out_t, nb, len, cin, cout]() {
      const std::vector<double>& g = out_t->grad;
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) bias->grad[i % cout] += g[i];
      }
      if (a->requires_grad) a->ensure_grad();
      if (w->requires_grad) w->ensure_grad();
      for (int s = 0; s < nb; ++s) {
        const size_t abase = static_cast<size_t>(s) * len * cin;
        const size_t obase = static_cast<size_t>(s) * len * cout;
        for (int t = 0; t < len; ++t) {
          const double* grow = &g[obase + static_cast<size_t>(t) * cout];
          for (int dt = -1; dt <= 1; ++dt) {
            const int src = t + dt;
            if (src < 0 || src >= len) continue;
            const size_t wbase = static_cast<size_t>(dt + 1) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
              const double* wrow = &w->data[wbase + static_cast<size_t>(ci) * cout];
              if (a->requires_grad) {
                double acc = 0.0;
                for (int o = 0; o < cout; ++o) acc += grow[o] * wrow[o];
                a->grad[abase + static_cast<size_t>(src) * cin + ci] += acc;
              }
              if (w->requires_grad) {
                const double av = a->data[abase + static_cast<size_t>(src) * cin + ci];
                if (av == 0.0) continue;
                double* dwrow = &w->grad[wbase + static_cast<size_t>(ci) * cout];
                for (int o = 0; o < cout; ++o) dwrow[o] += av * grow[o];
              }
            }
          }
        }
      }
    };
  }
  return result;
}

TensorPtr Tape::mse_loss(const TensorPtr& pred, const TensorPtr& target) {
  if (pred->shape != target->shape)
    throw ShapeMismatch("mse_loss " + shape_str(pred->shape) + " vs " +
                        shape_str(target->shape));
  const size_t n = pred->data.size();
  if (n == 0) throw ShapeMismatch("mse_loss over an empty tensor");
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  const bool track = pred->requires_grad || target->requires_grad;
  TensorPtr result = emit({1}, {acc / static_cast<double>(n)}, track, nullptr);
  if (track) {
    TensorPtr out_t = result;
    nodes_.back().pull = [pred, target, out_t, n]() {
      const double scale = out_t->grad[0] * 2.0 / static_cast<double>(n);
      if (pred->requires_grad) {
        pred->ensure_grad();
        for (size_t i = 0; i < n; ++i)
          pred->grad[i] += scale * (pred->data[i] - target->data[i]);
      }
      if (target->requires_grad) {
        target->ensure_grad();
        for (size_t i = 0; i < n; ++i)
          target->grad[i] -= scale * (pred->data[i] - target->data[i]);
      }
    };
  }
  return result;
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->size() != 1)
    throw NotScalar("backward needs a scalar, got " + shape_str(loss->shape));
  for (auto& node : nodes_) {
    node.out->ensure_grad();
    node.out->zero_grad();
  }
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->pull) it->pull();
}

void adam_step(std::vector<TensorPtr>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p]->data.size(), 0.0);
      state.v[p].assign(params[p]->data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeMismatch("adam state holds " + std::to_string(state.m.size()) +
                        " slots for " + std::to_string(params.size()) + " params");
  ++state.step_count;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    t.ensure_grad();
    if (state.m[p].size() != t.data.size())
      throw ShapeMismatch("adam slot " + std::to_string(p) + " size changed");
    for (size_t i = 0; i < t.data.size(); ++i) {
      const double g = t.grad[i];
      state.m[p][i] = c.beta1 * state.m[p][i] + (1.0 - c.beta1) * g;
      state.v[p][i] = c.beta2 * state.v[p][i] + (1.0 - c.beta2) * g * g;
      const double mhat = state.m[p][i] / bc1;
      const double vhat = state.v[p][i] / bc2;
      t.data[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    t.zero_grad();
  }
}

void glorot_fill(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace pflab::ad
