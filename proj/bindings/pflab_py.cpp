// Python bindings for the core operations: case handling, the two solvers,
// dataset generation, training, and evaluation. Reports cross the boundary
// as JSON text so callers can json.loads them without custom types.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "pflab/commands.hpp"
#include "pflab/dataset.hpp"
#include "pflab/metrics.hpp"
#include "pflab/models.hpp"
#include "pflab/network.hpp"
#include "pflab/provenance.hpp"
#include "pflab/solvers.hpp"

namespace py = pybind11;
using namespace pflab;

namespace {

SolverConfig make_solver_config(double tolerance, int max_iter) {
  SolverConfig config;
  config.tolerance = tolerance;
  config.max_iter = max_iter;
  return config;
}

ModelSpec make_spec(const std::string& kind, int embed_dim, const std::vector<int>& hidden_sizes,
                    int epochs, int batch_size, double lr, uint64_t seed) {
  ModelSpec spec;
  spec.kind = model_kind_from_string(kind);
  spec.embed_dim = embed_dim;
  spec.hidden_sizes = hidden_sizes;
  spec.epochs = epochs;
  spec.batch_size = batch_size;
  spec.lr = lr;
  spec.seed = seed;
  return spec;
}

linalg::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  linalg::Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw std::invalid_argument("ragged feature rows");
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return m;
}

Provenance none_provenance() {
  Provenance p;
  p.config_hash = "adhoc";
  return p;
}

}  // namespace

PYBIND11_MODULE(_pflab, m) {
  m.doc() = "power flow solvers, dataset generation, and surrogate models";
  m.attr("__version__") = kVersion;

  py::class_<NetworkCase>(m, "NetworkCase")
      .def_readonly("name", &NetworkCase::name)
      .def_property_readonly("n_buses", &NetworkCase::n_buses)
      .def_property_readonly("n_branches", &NetworkCase::n_branches)
      .def_readonly("ids", &NetworkCase::ids)
      .def("__repr__", [](const NetworkCase& net) {
        return "NetworkCase('" + net.name + "', " + std::to_string(net.n_buses()) + " buses, " +
               std::to_string(net.n_branches()) + " branches)";
      });

  py::class_<PFSolution>(m, "PFSolution")
      .def_readonly("v_mag", &PFSolution::v_mag)
      .def_readonly("v_ang", &PFSolution::v_ang)
      .def_readonly("p_branch", &PFSolution::p_branch)
      .def_readonly("q_branch", &PFSolution::q_branch)
      .def_readonly("converged", &PFSolution::converged)
      .def_readonly("iterations", &PFSolution::iterations)
      .def_readonly("max_mismatch", &PFSolution::max_mismatch);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("case_id", &Dataset::case_id)
      .def_readonly("n_buses", &Dataset::n_buses)
      .def_readonly("n_branches", &Dataset::n_branches)
      .def_readonly("discarded", &Dataset::discarded)
      .def_property_readonly("n_samples",
                             [](const Dataset& ds) { return ds.samples.size(); })
      .def_readonly("train_idx", &Dataset::train_idx)
      .def_readonly("val_idx", &Dataset::val_idx)
      .def(
          "sample",
          [](const Dataset& ds, size_t i) {
            const Sample& s = ds.samples.at(i);
            std::vector<std::vector<double>> x(static_cast<size_t>(s.x.rows));
            for (int r = 0; r < s.x.rows; ++r)
              for (int c = 0; c < s.x.cols; ++c) x[static_cast<size_t>(r)].push_back(s.x(r, c));
            return py::make_tuple(x, s.y);
          },
          py::arg("index"), "features (per-bus rows) and targets of one sample");

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_readonly("case_id", &TrainedModel::case_id)
      .def_readonly("best_epoch", &TrainedModel::best_epoch)
      .def_readonly("train_loss", &TrainedModel::train_loss)
      .def_readonly("val_loss", &TrainedModel::val_loss)
      .def_property_readonly("kind",
                             [](const TrainedModel& model) { return to_string(model.spec.kind); })
      .def(
          "predict",
          [](const TrainedModel& model, const std::vector<std::vector<double>>& x) {
            return model.predict(to_matrix(x));
          },
          py::arg("features"),
          "raw per-bus features in, voltage magnitudes then branch MW out");

  m.def("load_case", [](const std::string& path) { return parse_case(read_file(path), path); },
        py::arg("path"), "parse a grid case file");
  m.def("parse_case", &parse_case, py::arg("text"), py::arg("name") = "case",
        "parse a grid case from JSON text");

  m.def(
      "solve_acpf",
      [](const NetworkCase& net, double tolerance, int max_iter) {
        return solve_acpf(net, make_solver_config(tolerance, max_iter));
      },
      py::arg("case"), py::arg("tolerance") = 1e-8, py::arg("max_iter") = 20,
      "Newton-Raphson AC power flow");
  m.def("solve_dcpf", &solve_dcpf, py::arg("case"), "linearized DC power flow");

  m.def(
      "generate",
      [](const NetworkCase& net, int n_samples, uint64_t seed) {
        return generate(net, n_samples, seed);
      },
      py::arg("case"), py::arg("n_samples"), py::arg("seed") = 1,
      "perturb injections and solve to build a labeled dataset");
  m.def(
      "write_dataset",
      [](const Dataset& ds, const std::string& path) { write_dataset(ds, path, none_provenance()); },
      py::arg("dataset"), py::arg("path"));
  m.def("read_dataset", &read_dataset, py::arg("path"));

  m.def(
      "train",
      [](const Dataset& ds, const NetworkCase& net, const std::string& kind, int embed_dim,
         const std::vector<int>& hidden_sizes, int epochs, int batch_size, double lr,
         uint64_t seed) {
        const ModelSpec spec =
            make_spec(kind, embed_dim, hidden_sizes, epochs, batch_size, lr, seed);
        linalg::Matrix v_operator;
        if (spec.kind == ModelKind::Gnn)
          v_operator = renormalize_adjacency(build_adjacency(net));
        return train(spec, ds, v_operator);
      },
      py::arg("dataset"), py::arg("case"), py::arg("kind") = "gnn", py::arg("embed_dim") = 32,
      py::arg("hidden_sizes") = std::vector<int>{128, 64}, py::arg("epochs") = 1000,
      py::arg("batch_size") = 64, py::arg("lr") = 1e-3, py::arg("seed") = 7,
      "fit a surrogate to the training split");
  m.def(
      "save_model",
      [](const TrainedModel& model, const std::string& path) {
        save_model(model, path, none_provenance());
      },
      py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "evaluate",
      [](const TrainedModel& model, const Dataset& ds, const NetworkCase& net,
         const std::vector<double>& taus) {
        ModelSource source(model);
        return report_to_json(evaluate(source, ds, net, taus), none_provenance());
      },
      py::arg("model"), py::arg("dataset"), py::arg("case"),
      py::arg("taus") = std::vector<double>{0.01, 0.02, 0.03, 0.04, 0.05},
      "score a trained model on the validation split; returns JSON text");
  m.def(
      "evaluate_dcpf",
      [](const Dataset& ds, const NetworkCase& net, const std::vector<double>& taus) {
        SolverConfig solver;
        DcpfSource source(net, solver);
        return report_to_json(evaluate(source, ds, net, taus), none_provenance());
      },
      py::arg("dataset"), py::arg("case"),
      py::arg("taus") = std::vector<double>{0.01, 0.02, 0.03, 0.04, 0.05},
      "score the DC baseline on the validation split; returns JSON text");
}
