#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pflab/models.hpp"
#include "pflab/provenance.hpp"
#include "pflab/solvers.hpp"

namespace pflab {

// Everything a pipeline run needs. Flags override file values, which
// override built-in defaults; the seed may also fall back to PFLAB_SEED.
struct RunConfig {
  std::string case_path;
  std::string out_dir = "out";
  int n_samples = 10000;
  uint64_t seed = 1;
  std::vector<double> tolerances{0.01, 0.02, 0.03, 0.04, 0.05};
  SolverConfig solver;
  std::map<std::string, ModelSpec> models;  // keyed by kind name
  std::vector<std::string> compare{"gnn", "dnn", "cnn", "dcpf"};
};

RunConfig default_run_config();

// Parses a JSON config on top of `base`; unknown keys are rejected so typos
// fail loudly instead of silently running defaults.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base);

// The spec for one kind with its seed resolved: a zero (unset) seed derives
// a per-kind stream from the run seed.
ModelSpec effective_spec(const RunConfig& config, ModelKind kind);

// Hash over everything that shapes artifact bytes: case file content and
// stem, sampling, solver, model and comparison settings. Output locations
// are excluded so a relocated rerun reproduces identical artifacts.
std::string run_config_hash(const RunConfig& config);

Provenance run_provenance(const RunConfig& config);

// Artifact locations inside config.out_dir, named after the case stem.
std::string dataset_path(const RunConfig& config);
std::string model_path(const RunConfig& config, const std::string& kind);
std::string loss_history_path(const RunConfig& config, const std::string& kind);

int cmd_solve(const RunConfig& config, const std::string& method, const std::string& json_out,
              std::ostream& out, std::ostream& err);
int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& config, const std::string& kind, std::ostream& out,
              std::ostream& err);
// `model` is a kind name, "dcpf"/"acpf", or a checkpoint path.
int cmd_evaluate(const RunConfig& config, const std::string& model, std::ostream& out,
                 std::ostream& err);
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err);

// Runs `body`, mapping thrown errors onto the documented exit codes:
// 0 success, 1 usage/IO, 2 numerical failure, 3 validation failure.
int run_command(const std::function<int()>& body, std::ostream& err);

}  // namespace pflab
