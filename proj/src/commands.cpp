#include "pflab/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "pflab/dataset.hpp"
#include "pflab/errors.hpp"
#include "pflab/metrics.hpp"
#include "pflab/network.hpp"
#include "pflab/rng.hpp"

namespace pflab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Per-kind training seeds derive from the run seed at streams 10, 11, 12.
constexpr uint64_t kModelSeedStreamBase = 10;

std::string case_stem(const RunConfig& config) {
  return fs::path(config.case_path).stem().string();
}

std::string join_out(const RunConfig& config, const std::string& file) {
  return (fs::path(config.out_dir) / file).string();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string provenance_line(const Provenance& p) {
  return "# pflab " + p.version + " config=" + p.config_hash + " seed=" + std::to_string(p.seed) +
         "\n";
}

int64_t expect_int(const ordered_json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw IoError("config key '" + key + "' must be an integer");
  return j.get<int64_t>();
}

uint64_t expect_uint(const ordered_json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<int64_t>() >= 0))
    throw IoError("config key '" + key + "' must be a non-negative integer");
  return j.get<uint64_t>();
}

double expect_number(const ordered_json& j, const std::string& key) {
  if (!j.is_number()) throw IoError("config key '" + key + "' must be a number");
  return j.get<double>();
}

std::string expect_string(const ordered_json& j, const std::string& key) {
  if (!j.is_string()) throw IoError("config key '" + key + "' must be a string");
  return j.get<std::string>();
}

bool expect_bool(const ordered_json& j, const std::string& key) {
  if (!j.is_boolean()) throw IoError("config key '" + key + "' must be a boolean");
  return j.get<bool>();
}

ModelSpec parse_model_spec(const ordered_json& j, const std::string& kind_name, ModelSpec spec) {
  if (!j.is_object()) throw IoError("config key 'models." + kind_name + "' must be an object");
  spec.kind = model_kind_from_string(kind_name);
  for (const auto& [key, val] : j.items()) {
    const std::string path = "models." + kind_name + "." + key;
    if (key == "embed_dim") {
      spec.embed_dim = static_cast<int>(expect_int(val, path));
    } else if (key == "hidden_sizes") {
      if (!val.is_array() || val.empty()) throw IoError("config key '" + path + "' must be a non-empty array");
      spec.hidden_sizes.clear();
      for (const auto& h : val) spec.hidden_sizes.push_back(static_cast<int>(expect_int(h, path)));
    } else if (key == "epochs") {
      spec.epochs = static_cast<int>(expect_int(val, path));
    } else if (key == "batch_size") {
      spec.batch_size = static_cast<int>(expect_int(val, path));
    } else if (key == "lr") {
      spec.lr = expect_number(val, path);
    } else if (key == "seed") {
      spec.seed = expect_uint(val, path);
    } else {
      throw IoError("unknown config key '" + path + "'");
    }
  }
  return spec;
}

ordered_json spec_hash_json(const ModelSpec& spec) {
  return ordered_json{{"batch_size", spec.batch_size}, {"embed_dim", spec.embed_dim},
                      {"epochs", spec.epochs},         {"hidden_sizes", spec.hidden_sizes},
                      {"lr", spec.lr},                 {"seed", spec.seed}};
}

// True when the artifact's embedded (version, config hash, seed) equals this
// run's triple, i.e. regenerating it would reproduce the same bytes.
bool artifact_matches(const std::string& path, const Provenance& want) {
  try {
    const std::string text = read_file(path);
    const auto line = text.substr(0, text.find('\n'));
    const auto j = ordered_json::parse(line);
    const auto& p = j.at("provenance");
    return p.at("version").get<std::string>() == want.version &&
           p.at("config_hash").get<std::string>() == want.config_hash &&
           p.at("seed").get<uint64_t>() == want.seed;
  } catch (...) {
    return false;
  }
}

Dataset ensure_dataset(const RunConfig& config, const NetworkCase& net, const Provenance& prov,
                       std::ostream& out) {
  const std::string path = dataset_path(config);
  if (fs::exists(path) && artifact_matches(path, prov)) {
    Dataset ds = read_dataset(path);
    out << "reusing dataset " << path << " (" << ds.samples.size() << " samples)\n";
    return ds;
  }
  Dataset ds = generate(net, config.n_samples, config.seed, config.solver);
  write_dataset(ds, path, prov);
  out << "wrote " << path << ": " << ds.samples.size() << " samples (" << ds.train_idx.size()
      << " train / " << ds.val_idx.size() << " val), " << ds.discarded << " discarded\n";
  return ds;
}

std::string loss_history_csv(const TrainedModel& model, const Provenance& prov) {
  std::string csv = provenance_line(prov);
  csv += "epoch,train_mse,val_mse\n";
  for (size_t i = 0; i < model.train_loss.size(); ++i) {
    csv += std::to_string(i + 1);
    csv += ',';
    csv += format_double(model.train_loss[i]);
    csv += ',';
    csv += format_double(model.val_loss[i]);
    csv += '\n';
  }
  return csv;
}

// Loads the checkpoint when this run already produced it; trains otherwise.
// Either way the checkpoint and loss-history files end up current.
TrainedModel ensure_model(const RunConfig& config, const Dataset& ds,
                          const linalg::Matrix& v_operator, ModelKind kind,
                          const Provenance& prov, std::ostream& out) {
  const std::string kind_name = to_string(kind);
  const std::string path = model_path(config, kind_name);
  if (fs::exists(path) && artifact_matches(path, prov)) {
    TrainedModel model = load_model(path);
    out << "reusing checkpoint " << path << "\n";
    write_file_atomic(loss_history_path(config, kind_name), loss_history_csv(model, prov));
    return model;
  }
  const ModelSpec spec = effective_spec(config, kind);
  TrainedModel model = train(spec, ds, v_operator);
  save_model(model, path, prov);
  write_file_atomic(loss_history_path(config, kind_name), loss_history_csv(model, prov));
  out << "trained " << kind_name << ": best epoch " << model.best_epoch << ", val mse "
      << format_double(model.val_loss.empty() ? 0.0 : model.val_loss[model.best_epoch - 1])
      << ", wrote " << path << "\n";
  return model;
}

void write_eval_artifacts(const RunConfig& config, const EvalReport& report,
                          const Provenance& prov, std::ostream& out) {
  const std::string base = case_stem(config) + "_" + report.source;
  const std::string json_path = join_out(config, base + ".eval.json");
  write_file_atomic(json_path, report_to_json(report, prov));
  write_file_atomic(join_out(config, base + ".eval.txt"),
                    provenance_line(prov) + report_to_text(report));
  write_file_atomic(join_out(config, base + ".errors.csv"),
                    provenance_line(prov) + report_errors_csv(report));
  out << "wrote " << json_path << " (+.txt, .errors.csv)\n";
}

std::string compare_text(const std::vector<EvalReport>& reports, const Provenance& prov) {
  std::string out = provenance_line(prov);
  if (reports.empty()) return out + "nothing to compare\n";
  out += "case " + reports.front().case_id + ", " + std::to_string(reports.front().n_eval) +
         " validation samples\n";

  out += "\ntolerance accuracy on branch flows (% of predictions within tau)\n";
  out += "source";
  for (double tau : reports.front().taus) {
    char label[32];
    std::snprintf(label, sizeof(label), "tau=%g%%", tau * 100.0);
    char cell[48];
    std::snprintf(cell, sizeof(cell), "  %9s", label);
    out += cell;
  }
  out += "\n";
  for (const auto& r : reports) {
    char name[16];
    std::snprintf(name, sizeof(name), "%-6s", r.source.c_str());
    out += name;
    for (double acc : r.tau_acc) out += fmt("  %9.3f", acc);
    out += "\n";
  }

  out += "\nfit quality\n";
  out += "source      r2_all    r2_flow    r2_vmag   max_e_mw   med_e_mw  mape_flow%\n";
  for (const auto& r : reports) {
    char name[16];
    std::snprintf(name, sizeof(name), "%-6s", r.source.c_str());
    out += name;
    out += fmt("  %8.5f", r.r2) + fmt("  %9.5f", r.r2_flows) + fmt("  %9.5f", r.r2_vmag) +
           fmt("  %9.4f", r.flow_err.max_e) + fmt("  %9.4f", r.flow_err.med_e) +
           fmt("  %10.4f", r.flow_err.mape * 100.0);
    out += "\n";
  }

  out += "\nvoltage errors (p.u.)\n";
  out += "source     max_e      med_e\n";
  for (const auto& r : reports) {
    char name[16];
    std::snprintf(name, sizeof(name), "%-6s", r.source.c_str());
    out += name;
    out += fmt("  %.6f", r.vmag_err.max_e) + fmt("   %.6f", r.vmag_err.med_e);
    out += "\n";
  }

  out += "\nprd of branch flows (%)\n";
  out += "source      mean        max        min     median      stdev  excluded\n";
  for (const auto& r : reports) {
    char name[16];
    std::snprintf(name, sizeof(name), "%-6s", r.source.c_str());
    out += name;
    out += fmt("  %8.4f", r.flow_prd.mean) + fmt("  %9.4f", r.flow_prd.max) +
           fmt("  %9.4f", r.flow_prd.min) + fmt("  %9.4f", r.flow_prd.median) +
           fmt("  %9.4f", r.flow_prd.stdev);
    out += "  " + std::to_string(r.flow_prd.excluded);
    out += "\n";
  }
  return out;
}

std::string compare_json(const std::vector<EvalReport>& reports, const std::string& case_id,
                         const Provenance& prov) {
  ordered_json doc;
  doc["case_id"] = case_id;
  doc["provenance"] = {{"version", prov.version},
                       {"config_hash", prov.config_hash},
                       {"seed", prov.seed}};
  auto& arr = doc["reports"] = ordered_json::array();
  for (const auto& r : reports) arr.push_back(ordered_json::parse(report_to_json(r, prov)));
  return doc.dump(2) + "\n";
}

}  // namespace

RunConfig default_run_config() {
  RunConfig config;
  for (ModelKind kind : {ModelKind::Gnn, ModelKind::Dnn, ModelKind::Cnn}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.seed = 0;  // derive from the run seed
    config.models[to_string(kind)] = spec;
  }
  return config;
}

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw IoError("config must be a JSON object");

  RunConfig config = base;
  for (const auto& [key, val] : j.items()) {
    if (key == "case") {
      config.case_path = expect_string(val, key);
    } else if (key == "out_dir") {
      config.out_dir = expect_string(val, key);
    } else if (key == "n_samples") {
      config.n_samples = static_cast<int>(expect_int(val, key));
    } else if (key == "seed") {
      config.seed = expect_uint(val, key);
    } else if (key == "tolerances") {
      if (!val.is_array() || val.empty())
        throw IoError("config key 'tolerances' must be a non-empty array");
      config.tolerances.clear();
      for (const auto& t : val) {
        const double tau = expect_number(t, key);
        if (!(tau > 0.0 && tau < 1.0))
          throw IoError("tolerances must lie strictly between 0 and 1");
        config.tolerances.push_back(tau);
      }
    } else if (key == "solver") {
      if (!val.is_object()) throw IoError("config key 'solver' must be an object");
      for (const auto& [skey, sval] : val.items()) {
        if (skey == "tolerance") config.solver.tolerance = expect_number(sval, "solver.tolerance");
        else if (skey == "max_iter") config.solver.max_iter = static_cast<int>(expect_int(sval, "solver.max_iter"));
        else if (skey == "flat_start") config.solver.flat_start = expect_bool(sval, "solver.flat_start");
        else throw IoError("unknown config key 'solver." + skey + "'");
      }
    } else if (key == "models") {
      if (!val.is_object()) throw IoError("config key 'models' must be an object");
      for (const auto& [kind_name, spec_json] : val.items()) {
        if (kind_name != "gnn" && kind_name != "dnn" && kind_name != "cnn")
          throw IoError("unknown model kind '" + kind_name + "' in config");
        ModelSpec start;
        start.seed = 0;
        auto it = config.models.find(kind_name);
        if (it != config.models.end()) start = it->second;
        config.models[kind_name] = parse_model_spec(spec_json, kind_name, start);
      }
    } else if (key == "compare") {
      if (!val.is_array()) throw IoError("config key 'compare' must be an array");
      config.compare.clear();
      for (const auto& entry : val) {
        const std::string name = expect_string(entry, key);
        if (name != "gnn" && name != "dnn" && name != "cnn" && name != "dcpf" && name != "acpf")
          throw IoError("unknown compare entry '" + name + "'");
        config.compare.push_back(name);
      }
    } else {
      throw IoError("unknown config key '" + key + "'");
    }
  }
  return config;
}

ModelSpec effective_spec(const RunConfig& config, ModelKind kind) {
  ModelSpec spec;
  auto it = config.models.find(to_string(kind));
  if (it != config.models.end()) spec = it->second;
  else spec.seed = 0;
  spec.kind = kind;
  if (spec.seed == 0)
    spec.seed = mix_seed(config.seed, kModelSeedStreamBase + static_cast<uint64_t>(kind));
  return spec;
}

std::string run_config_hash(const RunConfig& config) {
  ordered_json j;
  j["case_hash"] = fnv1a_hex(read_file(config.case_path));
  j["case_id"] = case_stem(config);
  j["compare"] = config.compare;
  ordered_json models = ordered_json::object();
  for (const char* name : {"cnn", "dnn", "gnn"})
    models[name] = spec_hash_json(effective_spec(config, model_kind_from_string(name)));
  j["models"] = models;
  j["n_samples"] = config.n_samples;
  j["seed"] = config.seed;
  j["solver"] = ordered_json{{"flat_start", config.solver.flat_start},
                             {"max_iter", config.solver.max_iter},
                             {"tolerance", config.solver.tolerance}};
  j["tolerances"] = config.tolerances;
  return fnv1a_hex(j.dump());
}

Provenance run_provenance(const RunConfig& config) {
  Provenance prov;
  prov.config_hash = run_config_hash(config);
  prov.seed = config.seed;
  return prov;
}

std::string dataset_path(const RunConfig& config) {
  return join_out(config, case_stem(config) + ".pfds");
}

std::string model_path(const RunConfig& config, const std::string& kind) {
  return join_out(config, case_stem(config) + "_" + kind + ".pfw");
}

std::string loss_history_path(const RunConfig& config, const std::string& kind) {
  return join_out(config, case_stem(config) + "_" + kind + "_loss_history.csv");
}

int cmd_solve(const RunConfig& config, const std::string& method, const std::string& json_out,
              std::ostream& out, std::ostream& err) {
  if (method != "acpf" && method != "dcpf")
    throw std::invalid_argument("method must be acpf or dcpf");
  const NetworkCase net = load_case(config.case_path);
  const PFSolution sol = method == "dcpf" ? solve_dcpf(net) : solve_acpf(net, config.solver);

  out << "case " << net.name << ": " << net.n_buses() << " buses, " << net.n_branches()
      << " branches, method " << method << "\n";
  if (method == "acpf") {
    if (sol.converged)
      out << "converged in " << sol.iterations << " iterations, max mismatch "
          << format_double(sol.max_mismatch) << " p.u.\n";
    else
      out << "stopped after " << sol.iterations << " iterations, max mismatch "
          << format_double(sol.max_mismatch) << " p.u.\n";
  } else {
    out << "linear solution: flat voltage magnitudes, lossless flows\n";
  }

  out << "\n bus  kind     V (p.u.)   theta (deg)\n";
  constexpr double kRadToDeg = 180.0 / std::numbers::pi;
  for (int i = 0; i < net.n_buses(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%4d  %-5s  %9.5f  %12.4f\n", net.ids[i],
                  to_string(net.buses[i].kind).c_str(), sol.v_mag[i], sol.v_ang[i] * kRadToDeg);
    out << buf;
  }

  out << "\n branch           P (MW)     Q (MVar)\n";
  for (int b = 0; b < net.n_branches(); ++b) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%4d->%-4d  %12.4f  %11.4f\n", net.ids[net.branches[b].from],
                  net.ids[net.branches[b].to], sol.p_branch[b], sol.q_branch[b]);
    out << buf;
  }

  double losses = 0.0;
  if (method == "acpf") {
    const AdmittanceMatrix ybus = build_ybus(net);
    const auto [pc, qc] = calculated_injection(ybus, sol.v_mag, sol.v_ang);
    for (double p : pc) losses += p;
    losses *= net.base_mva;
  }
  out << "\nsystem losses " << fmt("%.4f", losses) << " MW\n";

  if (!json_out.empty()) {
    write_file_atomic(json_out, solution_to_json(net, sol, run_provenance(config)));
    out << "wrote " << json_out << "\n";
  }
  if (!sol.converged) {
    err << "error: solver did not converge within " << config.solver.max_iter << " iterations\n";
    return 2;
  }
  return 0;
}

int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  (void)err;
  const NetworkCase net = load_case(config.case_path);
  const Provenance prov = run_provenance(config);
  ensure_dataset(config, net, prov, out);
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& kind_name, std::ostream& out,
              std::ostream& err) {
  (void)err;
  const ModelKind kind = model_kind_from_string(kind_name);
  const NetworkCase net = load_case(config.case_path);
  const Provenance prov = run_provenance(config);
  const Dataset ds = ensure_dataset(config, net, prov, out);
  linalg::Matrix v_operator;
  if (kind == ModelKind::Gnn) v_operator = renormalize_adjacency(build_adjacency(net));
  ensure_model(config, ds, v_operator, kind, prov, out);
  return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& model, std::ostream& out,
                 std::ostream& err) {
  (void)err;
  const NetworkCase net = load_case(config.case_path);
  const Provenance prov = run_provenance(config);
  const Dataset ds = ensure_dataset(config, net, prov, out);

  std::optional<TrainedModel> keep;
  std::unique_ptr<PredictionSource> source;
  if (model == "dcpf") {
    source = std::make_unique<DcpfSource>(net, config.solver);
  } else if (model == "acpf") {
    source = std::make_unique<AcpfSource>(net, config.solver);
  } else {
    std::string path = model;
    if (model == "gnn" || model == "dnn" || model == "cnn") path = model_path(config, model);
    keep = load_model(path);
    source = std::make_unique<ModelSource>(*keep);
  }

  const EvalReport report = evaluate(*source, ds, net, config.tolerances);
  write_eval_artifacts(config, report, prov, out);
  out << report_to_text(report);
  return 0;
}

int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err) {
  (void)err;
  const NetworkCase net = load_case(config.case_path);
  const Provenance prov = run_provenance(config);
  const Dataset ds = ensure_dataset(config, net, prov, out);
  linalg::Matrix v_operator;

  std::vector<EvalReport> reports;
  for (const std::string& entry : config.compare) {
    std::optional<TrainedModel> keep;
    std::unique_ptr<PredictionSource> source;
    if (entry == "dcpf") {
      source = std::make_unique<DcpfSource>(net, config.solver);
    } else if (entry == "acpf") {
      source = std::make_unique<AcpfSource>(net, config.solver);
    } else {
      const ModelKind kind = model_kind_from_string(entry);
      if (kind == ModelKind::Gnn && v_operator.rows == 0)
        v_operator = renormalize_adjacency(build_adjacency(net));
      keep = ensure_model(config, ds, v_operator, kind, prov, out);
      source = std::make_unique<ModelSource>(*keep);
    }
    EvalReport report = evaluate(*source, ds, net, config.tolerances);
    // Flush the per-source artifacts before touching the next source, so a
    // later failure still leaves everything computed so far on disk.
    write_eval_artifacts(config, report, prov, out);
    reports.push_back(std::move(report));
  }

  const std::string text = compare_text(reports, prov);
  const std::string stem = case_stem(config);
  write_file_atomic(join_out(config, stem + ".compare.txt"), text);
  write_file_atomic(join_out(config, stem + ".compare.json"),
                    compare_json(reports, net.name, prov));
  out << "\n" << text;
  return 0;
}

int run_command(const std::function<int()>& body, std::ostream& err) {
  static const std::set<std::string> numerical = {
      "SingularJacobian", "SingularBprime",    "TooManyDivergent",   "NonFiniteLoss",
      "NearCancellation", "DegenerateTargets", "EmptyAfterExclusion"};
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return numerical.count(e.code()) ? 2 : 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pflab
