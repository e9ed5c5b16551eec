#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pflab/linalg.hpp"
#include "pflab/network.hpp"
#include "pflab/provenance.hpp"
#include "pflab/solvers.hpp"

namespace pflab {

// Feature columns per bus: P_gen, Q_gen, P_load, Q_load, V_set.
inline constexpr int kFeatureCount = 5;

struct NormStats {
  std::vector<double> x_mean, x_std;  // per feature column
  std::vector<double> y_mean, y_std;  // per target component

  bool operator==(const NormStats&) const = default;
};

struct SampleMeta {
  uint64_t seed = 0;            // stream that produced this sample's factors
  std::vector<double> factors;  // draws in order: (fP, fQ) per loaded bus, then fG per non-slack generator
  double rescale = 1.0;         // dispatch correction applied to non-slack p_set

  bool operator==(const SampleMeta&) const = default;
};

struct Sample {
  linalg::Matrix x;       // n_buses x kFeatureCount, raw units
  std::vector<double> y;  // v_mag per bus (p.u.), then from-end P per branch (MW)
  SampleMeta meta;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::string case_id;
  int n_buses = 0;
  int n_branches = 0;
  int n_features = kFeatureCount;
  uint64_t seed = 0;
  int discarded = 0;
  std::vector<Sample> samples;
  std::vector<int> train_idx, val_idx;  // sorted, disjoint, cover all samples
  NormStats norm_stats;                 // computed from the training split

  int n_targets() const { return n_buses + n_branches; }

  bool operator==(const Dataset&) const = default;
};

// Scales loads and non-slack dispatch by factors drawn uniformly from
// [0.85, 1.15], then rescales total non-slack dispatch so the slack keeps
// its base-case share of the balance. Loads and setpoints only; topology,
// kinds, and slack dispatch are untouched.
NetworkCase perturb_case(const NetworkCase& base, uint64_t seed, SampleMeta* meta = nullptr);

// Solves the base case and writes the resulting reactive output back into
// generator q_set (split evenly among generators on a bus), so the Q_gen
// feature column reflects an operating point instead of placeholder zeros.
NetworkCase with_solved_q(const NetworkCase& base, const SolverConfig& config = {});

linalg::Matrix assemble_features(const NetworkCase& net);

Dataset generate(const NetworkCase& base, int n_samples, uint64_t seed,
                 const SolverConfig& config = {});

linalg::Matrix normalize_features(const NormStats& stats, const linalg::Matrix& x);
linalg::Matrix denormalize_features(const NormStats& stats, const linalg::Matrix& x);
std::vector<double> normalize_targets(const NormStats& stats, const std::vector<double>& y);
std::vector<double> denormalize_targets(const NormStats& stats, const std::vector<double>& y);

void write_dataset(const Dataset& ds, const std::string& path, const Provenance& provenance);
Dataset read_dataset(const std::string& path);

}  // namespace pflab
