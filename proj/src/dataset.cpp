#include "pflab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pflab/errors.hpp"
#include "pflab/rng.hpp"

namespace pflab {

namespace {

constexpr double kFactorLo = 0.85;
constexpr double kFactorHi = 1.15;
constexpr uint64_t kSampleStream = 1;
constexpr uint64_t kSplitStream = 2;
constexpr double kConstantTargetStd = 1e-8;

bool is_loaded(const Bus& bus) { return bus.p_load != 0.0 || bus.q_load != 0.0; }

}  // namespace

NetworkCase perturb_case(const NetworkCase& base, uint64_t seed, SampleMeta* meta) {
  NetworkCase out = base;
  Rng rng(seed);
  std::vector<double> factors;

  double base_load = 0.0, base_dispatch = 0.0;
  const int slack = base.slack();
  for (const auto& bus : base.buses) base_load += bus.p_load;
  for (const auto& gen : base.generators)
    if (gen.bus != slack) base_dispatch += gen.p_set;

  for (auto& bus : out.buses) {
    if (!is_loaded(bus)) continue;
    const double fp = rng.uniform(kFactorLo, kFactorHi);
    const double fq = rng.uniform(kFactorLo, kFactorHi);
    factors.push_back(fp);
    factors.push_back(fq);
    bus.p_load *= fp;
    bus.q_load *= fq;
  }

  double new_dispatch = 0.0;
  for (auto& gen : out.generators) {
    if (gen.bus == slack) continue;
    const double fg = rng.uniform(kFactorLo, kFactorHi);
    factors.push_back(fg);
    gen.p_set *= fg;
    new_dispatch += gen.p_set;
  }

  // Keep non-slack dispatch at its base-case share of total load, so the
  // slack absorbs losses plus a bounded residual rather than the whole drift.
  double rescale = 1.0;
  if (base_load > 0.0 && new_dispatch > 0.0) {
    double new_load = 0.0;
    for (const auto& bus : out.buses) new_load += bus.p_load;
    rescale = (base_dispatch / base_load) * new_load / new_dispatch;
    for (auto& gen : out.generators)
      if (gen.bus != slack) gen.p_set *= rescale;
  }

  if (meta) {
    meta->seed = seed;
    meta->factors = std::move(factors);
    meta->rescale = rescale;
  }
  return out;
}

NetworkCase with_solved_q(const NetworkCase& base, const SolverConfig& config) {
  PFSolution sol = solve_acpf(base, config);
  if (!sol.converged)
    throw TooManyDivergent("base case '" + base.name + "' did not converge in " +
                           std::to_string(config.max_iter) + " iterations");
  const AdmittanceMatrix ybus = build_ybus(base);
  auto [pc, qc] = calculated_injection(ybus, sol.v_mag, sol.v_ang);
  (void)pc;

  NetworkCase out = base;
  std::vector<int> gen_count(base.n_buses(), 0);
  for (const auto& gen : base.generators) ++gen_count[gen.bus];
  for (auto& gen : out.generators) {
    const int i = gen.bus;
    const double q_bus = qc[i] * base.base_mva + base.buses[i].q_load;
    gen.q_set = q_bus / gen_count[i];
  }
  return out;
}

linalg::Matrix assemble_features(const NetworkCase& net) {
  const int n = net.n_buses();
  linalg::Matrix x(n, kFeatureCount);
  for (const auto& gen : net.generators) {
    x(gen.bus, 0) += gen.p_set;
    x(gen.bus, 1) += gen.q_set;
  }
  for (int i = 0; i < n; ++i) {
    x(i, 2) = net.buses[i].p_load;
    x(i, 3) = net.buses[i].q_load;
    x(i, 4) = net.buses[i].v_mag;
  }
  return x;
}

namespace {

NormStats compute_norm_stats(const Dataset& ds) {
  NormStats stats;
  const int f = ds.n_features;
  const int t = ds.n_targets();
  stats.x_mean.assign(f, 0.0);
  stats.x_std.assign(f, 0.0);
  stats.y_mean.assign(t, 0.0);
  stats.y_std.assign(t, 0.0);

  const size_t n_train = ds.train_idx.size();
  const size_t x_rows = n_train * static_cast<size_t>(ds.n_buses);
  for (int idx : ds.train_idx) {
    const Sample& s = ds.samples[idx];
    for (int i = 0; i < ds.n_buses; ++i)
      for (int j = 0; j < f; ++j) stats.x_mean[j] += s.x(i, j);
    for (int c = 0; c < t; ++c) stats.y_mean[c] += s.y[c];
  }
  for (int j = 0; j < f; ++j) stats.x_mean[j] /= static_cast<double>(x_rows);
  for (int c = 0; c < t; ++c) stats.y_mean[c] /= static_cast<double>(n_train);

  for (int idx : ds.train_idx) {
    const Sample& s = ds.samples[idx];
    for (int i = 0; i < ds.n_buses; ++i)
      for (int j = 0; j < f; ++j) {
        const double d = s.x(i, j) - stats.x_mean[j];
        stats.x_std[j] += d * d;
      }
    for (int c = 0; c < t; ++c) {
      const double d = s.y[c] - stats.y_mean[c];
      stats.y_std[c] += d * d;
    }
  }
  bool any_varying = false;
  for (int j = 0; j < f; ++j) {
    stats.x_std[j] = std::sqrt(stats.x_std[j] / static_cast<double>(x_rows));
    if (stats.x_std[j] < 1e-12) stats.x_std[j] = 1.0;  // constant column: shift only
  }
  for (int c = 0; c < t; ++c) {
    stats.y_std[c] = std::sqrt(stats.y_std[c] / static_cast<double>(n_train));
    // Constant targets (fixed PV voltages, structurally zero flows) get a
    // tiny synthetic spread so denormalized predictions collapse onto the
    // constant instead of wandering at unit scale.
    if (stats.y_std[c] < 1e-12)
      stats.y_std[c] = kConstantTargetStd;
    else
      any_varying = true;
  }
  if (!any_varying && n_train >= 2)
    throw DegenerateTargets("every target component is constant across the training split");
  return stats;
}

}  // namespace

Dataset generate(const NetworkCase& base, int n_samples, uint64_t seed,
                 const SolverConfig& config) {
  if (n_samples < 5) throw std::invalid_argument("n_samples must be at least 5");

  const NetworkCase featured = with_solved_q(base, config);

  Dataset ds;
  ds.case_id = base.name;
  ds.n_buses = base.n_buses();
  ds.n_branches = base.n_branches();
  ds.seed = seed;
  ds.samples.reserve(n_samples);

  const uint64_t sample_root = mix_seed(seed, kSampleStream);
  uint64_t attempt = 0;
  while (static_cast<int>(ds.samples.size()) < n_samples) {
    const uint64_t sample_seed = mix_seed(sample_root, attempt++);
    SampleMeta meta;
    const NetworkCase perturbed = perturb_case(featured, sample_seed, &meta);
    PFSolution sol;
    bool ok = true;
    try {
      sol = solve_acpf(perturbed, config);
      ok = sol.converged;
    } catch (const SingularJacobian&) {
      ok = false;
    }
    if (!ok) {
      ++ds.discarded;
      if (static_cast<double>(ds.discarded) > static_cast<double>(n_samples) / 9.0)
        throw TooManyDivergent(std::to_string(ds.discarded) + " divergent samples while collecting " +
                               std::to_string(n_samples) + " for case '" + base.name + "'");
      continue;
    }
    Sample s;
    s.x = assemble_features(perturbed);
    s.y.reserve(ds.n_targets());
    s.y.insert(s.y.end(), sol.v_mag.begin(), sol.v_mag.end());
    s.y.insert(s.y.end(), sol.p_branch.begin(), sol.p_branch.end());
    s.meta = std::move(meta);
    ds.samples.push_back(std::move(s));
  }

  std::vector<int> perm(n_samples);
  std::iota(perm.begin(), perm.end(), 0);
  Rng split_rng(mix_seed(seed, kSplitStream));
  split_rng.shuffle(perm);
  int n_train = static_cast<int>(std::llround(0.8 * n_samples));
  n_train = std::clamp(n_train, 1, n_samples - 1);
  ds.train_idx.assign(perm.begin(), perm.begin() + n_train);
  ds.val_idx.assign(perm.begin() + n_train, perm.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());

  ds.norm_stats = compute_norm_stats(ds);
  return ds;
}

linalg::Matrix normalize_features(const NormStats& stats, const linalg::Matrix& x) {
  if (x.cols != static_cast<int>(stats.x_mean.size()))
    throw ShapeMismatch("feature matrix has " + std::to_string(x.cols) + " columns, stats have " +
                        std::to_string(stats.x_mean.size()));
  linalg::Matrix out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(i, j) = (x(i, j) - stats.x_mean[j]) / stats.x_std[j];
  return out;
}

linalg::Matrix denormalize_features(const NormStats& stats, const linalg::Matrix& x) {
  if (x.cols != static_cast<int>(stats.x_mean.size()))
    throw ShapeMismatch("feature matrix has " + std::to_string(x.cols) + " columns, stats have " +
                        std::to_string(stats.x_mean.size()));
  linalg::Matrix out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(i, j) = x(i, j) * stats.x_std[j] + stats.x_mean[j];
  return out;
}

std::vector<double> normalize_targets(const NormStats& stats, const std::vector<double>& y) {
  if (y.size() != stats.y_mean.size())
    throw ShapeMismatch("target vector of " + std::to_string(y.size()) + " vs stats of " +
                        std::to_string(stats.y_mean.size()));
  std::vector<double> out(y.size());
  for (size_t c = 0; c < y.size(); ++c) out[c] = (y[c] - stats.y_mean[c]) / stats.y_std[c];
  return out;
}

std::vector<double> denormalize_targets(const NormStats& stats, const std::vector<double>& y) {
  if (y.size() != stats.y_mean.size())
    throw ShapeMismatch("target vector of " + std::to_string(y.size()) + " vs stats of " +
                        std::to_string(stats.y_mean.size()));
  std::vector<double> out(y.size());
  for (size_t c = 0; c < y.size(); ++c) out[c] = y[c] * stats.y_std[c] + stats.y_mean[c];
  return out;
}

namespace {

std::string csv_line(const double* values, size_t count) {
  std::string line;
  for (size_t i = 0; i < count; ++i) {
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
    if (end == p) throw IoError("bad number in " + what + " row");
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
    else if (*p) throw IoError("unexpected character in " + what + " row");
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path, const Provenance& provenance) {
  nlohmann::ordered_json header;
  header["format"] = "pfds";
  header["case_id"] = ds.case_id;
  header["n_buses"] = ds.n_buses;
  header["n_branches"] = ds.n_branches;
  header["n_features"] = ds.n_features;
  header["n_samples"] = static_cast<int>(ds.samples.size());
  header["seed"] = ds.seed;
  header["discarded"] = ds.discarded;
  header["train_idx"] = ds.train_idx;
  header["val_idx"] = ds.val_idx;
  header["x_mean"] = ds.norm_stats.x_mean;
  header["x_std"] = ds.norm_stats.x_std;
  header["y_mean"] = ds.norm_stats.y_mean;
  header["y_std"] = ds.norm_stats.y_std;
  header["provenance"] = {{"version", provenance.version},
                          {"config_hash", provenance.config_hash},
                          {"seed", provenance.seed}};

  std::string out = header.dump();
  out += "\nX\n";
  for (const auto& s : ds.samples) {
    out += csv_line(s.x.a.data(), s.x.a.size());
    out += '\n';
  }
  out += "Y\n";
  for (const auto& s : ds.samples) {
    out += csv_line(s.y.data(), s.y.size());
    out += '\n';
  }
  out += "META\n";
  for (const auto& s : ds.samples) {
    std::string line = std::to_string(s.meta.seed);
    line += ',';
    line += format_double(s.meta.rescale);
    for (double f : s.meta.factors) {
      line += ',';
      line += format_double(f);
    }
    out += line;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Dataset read_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset header in " + path + ": " + e.what());
  }
  if (header.value("format", "") != "pfds")
    throw IoError(path + " is not a pfds dataset");

  Dataset ds;
  try {
    ds.case_id = header.at("case_id").get<std::string>();
    ds.n_buses = header.at("n_buses").get<int>();
    ds.n_branches = header.at("n_branches").get<int>();
    ds.n_features = header.at("n_features").get<int>();
    ds.seed = header.at("seed").get<uint64_t>();
    ds.discarded = header.at("discarded").get<int>();
    ds.train_idx = header.at("train_idx").get<std::vector<int>>();
    ds.val_idx = header.at("val_idx").get<std::vector<int>>();
    ds.norm_stats.x_mean = header.at("x_mean").get<std::vector<double>>();
    ds.norm_stats.x_std = header.at("x_std").get<std::vector<double>>();
    ds.norm_stats.y_mean = header.at("y_mean").get<std::vector<double>>();
    ds.norm_stats.y_std = header.at("y_std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset header in " + path + ": " + e.what());
  }
  const int n = header.at("n_samples").get<int>();

  auto expect = [&](const char* tag) {
    if (!std::getline(in, line) || line != tag)
      throw IoError("dataset " + path + " missing '" + tag + "' section");
  };

  ds.samples.resize(n);
  expect("X");
  for (int s = 0; s < n; ++s) {
    if (!std::getline(in, line)) throw IoError("dataset " + path + " truncated in X");
    auto vals = parse_csv_line(line, "X");
    if (static_cast<int>(vals.size()) != ds.n_buses * ds.n_features)
      throw IoError("X row " + std::to_string(s) + " has " + std::to_string(vals.size()) +
                    " values");
    ds.samples[s].x.rows = ds.n_buses;
    ds.samples[s].x.cols = ds.n_features;
    ds.samples[s].x.a = std::move(vals);
  }
  expect("Y");
  for (int s = 0; s < n; ++s) {
    if (!std::getline(in, line)) throw IoError("dataset " + path + " truncated in Y");
    auto vals = parse_csv_line(line, "Y");
    if (static_cast<int>(vals.size()) != ds.n_targets())
      throw IoError("Y row " + std::to_string(s) + " has " + std::to_string(vals.size()) +
                    " values");
    ds.samples[s].y = std::move(vals);
  }
  expect("META");
  for (int s = 0; s < n; ++s) {
    if (!std::getline(in, line)) throw IoError("dataset " + path + " truncated in META");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("META row " + std::to_string(s) + " malformed");
    ds.samples[s].meta.seed = std::strtoull(line.substr(0, comma).c_str(), nullptr, 10);
    auto rest = parse_csv_line(line.substr(comma + 1), "META");
    if (rest.empty()) throw IoError("META row " + std::to_string(s) + " malformed");
    ds.samples[s].meta.rescale = rest[0];
    ds.samples[s].meta.factors.assign(rest.begin() + 1, rest.end());
  }
  return ds;
}

}  // namespace pflab
