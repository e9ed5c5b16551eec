#include "pflab/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pflab/errors.hpp"
#include "pflab/rng.hpp"

namespace pflab {

namespace {

constexpr int kCnnChannels = 16;
constexpr uint64_t kInitStream = 0;
constexpr uint64_t kEpochStreamBase = 1000;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gnn: return "gnn";
    case ModelKind::Dnn: return "dnn";
    case ModelKind::Cnn: return "cnn";
  }
  return "gnn";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gnn") return ModelKind::Gnn;
  if (s == "dnn") return ModelKind::Dnn;
  if (s == "cnn") return ModelKind::Cnn;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::vector<ad::TensorPtr> init_params(const ModelSpec& spec, int n_buses, int n_features,
                                       int n_targets) {
  if (spec.hidden_sizes.empty())
    throw std::invalid_argument("hidden_sizes must name at least one layer");
  if (spec.kind == ModelKind::Gnn && spec.embed_dim < 1)
    throw std::invalid_argument("embed_dim must be positive");

  Rng rng(mix_seed(spec.seed, kInitStream));
  std::vector<ad::TensorPtr> params;
  auto dense = [&](int in, int out) {
    auto w = ad::make_tensor({in, out}, true);
    ad::glorot_fill(*w, in, out, rng);
    params.push_back(w);
    params.push_back(ad::make_tensor({out}, true));
  };

  int width = 0;
  switch (spec.kind) {
    case ModelKind::Gnn: {
      dense(n_features, spec.embed_dim);
      width = n_buses * spec.embed_dim;
      break;
    }
    case ModelKind::Dnn: {
      // Widths run hidden_sizes[0], then the whole list, mirroring a three
      // hidden layer decoder when two sizes are given.
      width = n_buses * n_features;
      dense(width, spec.hidden_sizes[0]);
      width = spec.hidden_sizes[0];
      break;
    }
    case ModelKind::Cnn: {
      auto w = ad::make_tensor({3, n_features, kCnnChannels}, true);
      ad::glorot_fill(*w, 3 * n_features, 3 * kCnnChannels, rng);
      params.push_back(w);
      params.push_back(ad::make_tensor({kCnnChannels}, true));
      width = n_buses * kCnnChannels;
      break;
    }
  }
  for (int h : spec.hidden_sizes) {
    dense(width, h);
    width = h;
  }
  dense(width, n_targets);
  return params;
}

ad::TensorPtr model_forward(ad::Tape& tape, const ModelSpec& spec, int n_buses, int n_targets,
                            const std::vector<ad::TensorPtr>& params, const ad::TensorPtr& input,
                            int batch) {
  (void)n_targets;
  size_t p = 0;
  ad::TensorPtr h;
  switch (spec.kind) {
    case ModelKind::Gnn: {
      auto z = tape.relu(tape.add(tape.matmul(input, params[0]), params[1]));
      h = tape.reshape(z, {batch, n_buses * spec.embed_dim});
      p = 2;
      break;
    }
    case ModelKind::Dnn: {
      h = input;
      break;
    }
    case ModelKind::Cnn: {
      auto z = tape.relu(tape.conv1d(input, params[0], params[1]));
      h = tape.reshape(z, {batch, n_buses * kCnnChannels});
      p = 2;
      break;
    }
  }
  while (p + 2 < params.size()) {
    h = tape.relu(tape.add(tape.matmul(h, params[p]), params[p + 1]));
    p += 2;
  }
  return tape.add(tape.matmul(h, params[p]), params[p + 1]);
}

namespace {

// Stacks normalized per-sample inputs into the tensor layout each kind eats.
ad::TensorPtr stack_inputs(const ModelSpec& spec, const std::vector<const linalg::Matrix*>& xs,
                           int n_buses, int n_features) {
  const int nb = static_cast<int>(xs.size());
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(nb) * n_buses * n_features);
  for (const auto* x : xs) flat.insert(flat.end(), x->a.begin(), x->a.end());
  switch (spec.kind) {
    case ModelKind::Gnn: return ad::make_tensor({nb * n_buses, n_features}, std::move(flat));
    case ModelKind::Dnn: return ad::make_tensor({nb, n_buses * n_features}, std::move(flat));
    case ModelKind::Cnn: return ad::make_tensor({nb, n_buses, n_features}, std::move(flat));
  }
  return nullptr;
}

ad::TensorPtr stack_targets(const std::vector<const std::vector<double>*>& ys) {
  const int nb = static_cast<int>(ys.size());
  const int t = static_cast<int>(ys[0]->size());
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(nb) * t);
  for (const auto* y : ys) flat.insert(flat.end(), y->begin(), y->end());
  return ad::make_tensor({nb, t}, std::move(flat));
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const Dataset& ds, const linalg::Matrix& v_operator) {
  if (spec.epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (spec.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw std::invalid_argument("dataset needs non-empty training and validation splits");
  if (spec.kind == ModelKind::Gnn &&
      (v_operator.rows != ds.n_buses || v_operator.cols != ds.n_buses))
    throw ShapeMismatch("graph operator is " + std::to_string(v_operator.rows) + "x" +
                        std::to_string(v_operator.cols) + " for " + std::to_string(ds.n_buses) +
                        " buses");

  TrainedModel model;
  model.spec = spec;
  model.case_id = ds.case_id;
  model.n_buses = ds.n_buses;
  model.n_branches = ds.n_branches;
  model.n_features = ds.n_features;
  model.norm_stats = ds.norm_stats;
  if (spec.kind == ModelKind::Gnn) model.v_operator = v_operator;
  model.params = init_params(spec, ds.n_buses, ds.n_features, ds.n_targets());

  // Inputs are constant across epochs; normalize (and premultiply by the
  // graph operator for the GNN) once up front.
  const size_t n_all = ds.samples.size();
  std::vector<linalg::Matrix> xin(n_all);
  std::vector<std::vector<double>> yn(n_all);
  for (size_t i = 0; i < n_all; ++i) {
    linalg::Matrix xnorm = normalize_features(ds.norm_stats, ds.samples[i].x);
    xin[i] = spec.kind == ModelKind::Gnn ? linalg::matmul(v_operator, xnorm) : std::move(xnorm);
    yn[i] = normalize_targets(ds.norm_stats, ds.samples[i].y);
  }

  auto run_split = [&](const std::vector<int>& order, bool learn,
                       ad::AdamState* adam) -> double {
    double acc = 0.0;
    for (size_t pos = 0; pos < order.size(); pos += spec.batch_size) {
      const size_t end = std::min(order.size(), pos + spec.batch_size);
      std::vector<const linalg::Matrix*> xs;
      std::vector<const std::vector<double>*> ys;
      xs.reserve(end - pos);
      ys.reserve(end - pos);
      for (size_t i = pos; i < end; ++i) {
        xs.push_back(&xin[order[i]]);
        ys.push_back(&yn[order[i]]);
      }
      ad::Tape tape;
      auto out = model_forward(tape, spec, ds.n_buses, ds.n_targets(), model.params,
                               stack_inputs(spec, xs, ds.n_buses, ds.n_features),
                               static_cast<int>(xs.size()));
      auto loss = tape.mse_loss(out, stack_targets(ys));
      acc += loss->data[0] * static_cast<double>(xs.size());
      if (learn) {
        tape.backward(loss);
        ad::adam_step(model.params, *adam);
      }
    }
    return acc / static_cast<double>(order.size());
  };

  ad::AdamState adam;
  adam.config.lr = spec.lr;
  double best_val = 0.0;
  int rise_run = 0;
  std::vector<std::vector<double>> best_data;
  for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
    // Cosine decay from the configured peak down to 1% of it. Constant-rate
    // Adam keeps kicking the weights around once the loss is small; the decay
    // settles the tail so the validation curve plateaus instead of twitching.
    const double frac = spec.epochs > 1
                            ? static_cast<double>(epoch - 1) / static_cast<double>(spec.epochs - 1)
                            : 1.0;
    adam.config.lr = spec.lr * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(kPi * frac)));
    std::vector<int> order = ds.train_idx;
    Rng shuffle_rng(mix_seed(spec.seed, kEpochStreamBase + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const double tl = run_split(order, true, &adam);
    const double vl = run_split(ds.val_idx, false, nullptr);
    if (!std::isfinite(tl) || !std::isfinite(vl))
      throw NonFiniteLoss("epoch " + std::to_string(epoch) + " of " + to_string(spec.kind) +
                          " on '" + ds.case_id + "'");
    model.train_loss.push_back(tl);
    model.val_loss.push_back(vl);
    if (best_data.empty() || vl < best_val) {
      best_val = vl;
      model.best_epoch = epoch;
      best_data.clear();
      for (const auto& p : model.params) best_data.push_back(p->data);
    }
    // Plateaus are fine; a sustained (50 epoch) rise of more than 10% above the
    // training loss a full 100-epoch window earlier is divergence.
    if (epoch > 100 && tl > 1.1 * model.train_loss[static_cast<size_t>(epoch) - 101]) {
      if (++rise_run >= 50)
        throw NonFiniteLoss("training loss rising since epoch " + std::to_string(epoch - 49) +
                            " of " + to_string(spec.kind) + " on '" + ds.case_id + "'");
    } else {
      rise_run = 0;
    }
  }
  for (size_t p = 0; p < model.params.size(); ++p) {
    model.params[p]->data = best_data[p];
    model.params[p]->zero_grad();
  }
  return model;
}

std::vector<double> TrainedModel::predict(const linalg::Matrix& x) const {
  if (x.rows != n_buses || x.cols != n_features)
    throw ShapeMismatch("features are " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                        ", model expects " + std::to_string(n_buses) + "x" +
                        std::to_string(n_features));
  linalg::Matrix xn = normalize_features(norm_stats, x);
  if (spec.kind == ModelKind::Gnn) xn = linalg::matmul(v_operator, xn);

  ad::TensorPtr input;
  switch (spec.kind) {
    case ModelKind::Gnn: input = ad::make_tensor({n_buses, n_features}, xn.a); break;
    case ModelKind::Dnn: input = ad::make_tensor({1, n_buses * n_features}, xn.a); break;
    case ModelKind::Cnn: input = ad::make_tensor({1, n_buses, n_features}, xn.a); break;
  }
  ad::Tape tape;
  auto out = model_forward(tape, spec, n_buses, n_targets(), params, input, 1);
  return denormalize_targets(norm_stats, out->data);
}

std::pair<std::vector<double>, std::vector<double>> TrainedModel::predict_split(
    const linalg::Matrix& x) const {
  std::vector<double> y = predict(x);
  std::vector<double> flows(y.begin() + n_buses, y.end());
  y.resize(n_buses);
  return {std::move(y), std::move(flows)};
}

namespace {

std::string csv_line(const std::vector<double>& values) {
  std::string line;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_double(values[i]);
  }
  return line;
}

std::vector<double> parse_csv_line(const std::string& line, const std::string& what) {
  std::vector<double> out;
  const char* p = line.c_str();
  while (*p) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) throw IoError("bad number in " + what + " line");
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
    else if (*p) throw IoError("unexpected character in " + what + " line");
  }
  return out;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path, const Provenance& provenance) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "pfw";
  manifest["kind"] = to_string(model.spec.kind);
  manifest["case_id"] = model.case_id;
  manifest["n_buses"] = model.n_buses;
  manifest["n_branches"] = model.n_branches;
  manifest["n_features"] = model.n_features;
  manifest["embed_dim"] = model.spec.embed_dim;
  manifest["hidden_sizes"] = model.spec.hidden_sizes;
  manifest["epochs"] = model.spec.epochs;
  manifest["batch_size"] = model.spec.batch_size;
  manifest["lr"] = model.spec.lr;
  manifest["seed"] = model.spec.seed;
  manifest["best_epoch"] = model.best_epoch;
  manifest["x_mean"] = model.norm_stats.x_mean;
  manifest["x_std"] = model.norm_stats.x_std;
  manifest["y_mean"] = model.norm_stats.y_mean;
  manifest["y_std"] = model.norm_stats.y_std;
  auto& shapes = manifest["param_shapes"] = nlohmann::ordered_json::array();
  for (const auto& p : model.params) shapes.push_back(p->shape);
  manifest["has_v_operator"] = model.spec.kind == ModelKind::Gnn;
  manifest["provenance"] = {{"version", provenance.version},
                            {"config_hash", provenance.config_hash},
                            {"seed", provenance.seed}};

  std::string out = manifest.dump();
  out += "\nPARAMS\n";
  for (const auto& p : model.params) {
    out += csv_line(p->data);
    out += '\n';
  }
  if (model.spec.kind == ModelKind::Gnn) {
    out += "VOP\n";
    out += csv_line(model.v_operator.a);
    out += '\n';
  }
  out += "LOSS\n";
  out += csv_line(model.train_loss);
  out += '\n';
  out += csv_line(model.val_loss);
  out += '\n';
  write_file_atomic(path, out);
}

TrainedModel load_model(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty model file " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad model manifest in " + path + ": " + e.what());
  }
  if (manifest.value("format", "") != "pfw") throw IoError(path + " is not a pfw model");

  TrainedModel model;
  std::vector<std::vector<int>> shapes;
  try {
    model.spec.kind = model_kind_from_string(manifest.at("kind").get<std::string>());
    model.case_id = manifest.at("case_id").get<std::string>();
    model.n_buses = manifest.at("n_buses").get<int>();
    model.n_branches = manifest.at("n_branches").get<int>();
    model.n_features = manifest.at("n_features").get<int>();
    model.spec.embed_dim = manifest.at("embed_dim").get<int>();
    model.spec.hidden_sizes = manifest.at("hidden_sizes").get<std::vector<int>>();
    model.spec.epochs = manifest.at("epochs").get<int>();
    model.spec.batch_size = manifest.at("batch_size").get<int>();
    model.spec.lr = manifest.at("lr").get<double>();
    model.spec.seed = manifest.at("seed").get<uint64_t>();
    model.best_epoch = manifest.at("best_epoch").get<int>();
    model.norm_stats.x_mean = manifest.at("x_mean").get<std::vector<double>>();
    model.norm_stats.x_std = manifest.at("x_std").get<std::vector<double>>();
    model.norm_stats.y_mean = manifest.at("y_mean").get<std::vector<double>>();
    model.norm_stats.y_std = manifest.at("y_std").get<std::vector<double>>();
    shapes = manifest.at("param_shapes").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad model manifest in " + path + ": " + e.what());
  }

  auto expect = [&](const char* tag) {
    if (!std::getline(in, line) || line != tag)
      throw IoError("model " + path + " missing '" + tag + "' section");
  };

  expect("PARAMS");
  for (const auto& shape : shapes) {
    if (!std::getline(in, line)) throw IoError("model " + path + " truncated in PARAMS");
    auto vals = parse_csv_line(line, "param");
    model.params.push_back(ad::make_tensor(shape, std::move(vals), true));
  }
  if (manifest.value("has_v_operator", false)) {
    expect("VOP");
    if (!std::getline(in, line)) throw IoError("model " + path + " truncated in VOP");
    auto vals = parse_csv_line(line, "v_operator");
    if (static_cast<int>(vals.size()) != model.n_buses * model.n_buses)
      throw IoError("v_operator in " + path + " has " + std::to_string(vals.size()) + " values");
    model.v_operator.rows = model.n_buses;
    model.v_operator.cols = model.n_buses;
    model.v_operator.a = std::move(vals);
  }
  expect("LOSS");
  if (!std::getline(in, line)) throw IoError("model " + path + " truncated in LOSS");
  model.train_loss = parse_csv_line(line, "train loss");
  if (!std::getline(in, line)) throw IoError("model " + path + " truncated in LOSS");
  model.val_loss = parse_csv_line(line, "val loss");
  return model;
}

}  // namespace pflab
