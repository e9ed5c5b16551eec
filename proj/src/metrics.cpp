#include "pflab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "pflab/errors.hpp"

namespace pflab {

double r2_score(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw ShapeMismatch("r2_score over " + std::to_string(y.size()) + " vs " +
                        std::to_string(yhat.size()) + " values");
  if (y.empty()) throw DegenerateTargets("r2_score over empty vectors");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    const double d = y[i] - mean;
    sse += e * e;
    sst += d * d;
  }
  if (sst == 0.0) throw DegenerateTargets("r2_score is undefined for constant targets");
  return 1.0 - sse / sst;
}

double prd(double y, double yhat) {
  const double denom = std::fabs(y + yhat);
  if (denom <= kExclusionFloor)
    throw NearCancellation("prd of " + format_double(y) + " and " + format_double(yhat));
  return 2.0 * std::fabs(y - yhat) / denom * 100.0;
}

namespace {

double median_of_sorted(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ErrorStats error_stats(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw ShapeMismatch("error_stats over " + std::to_string(y.size()) + " vs " +
                        std::to_string(yhat.size()) + " values");
  if (y.empty()) throw EmptyAfterExclusion("error_stats over empty vectors");
  ErrorStats stats;
  std::vector<double> abs_err(y.size());
  double mape_acc = 0.0;
  long mape_n = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    abs_err[i] = std::fabs(y[i] - yhat[i]);
    stats.max_e = std::max(stats.max_e, abs_err[i]);
    if (std::fabs(y[i]) < kExclusionFloor) {
      ++stats.mape_excluded;
    } else {
      mape_acc += abs_err[i] / std::fabs(y[i]);
      ++mape_n;
    }
  }
  if (mape_n == 0)
    throw EmptyAfterExclusion("every target fell below the MAPE exclusion floor");
  stats.mape = mape_acc / static_cast<double>(mape_n);
  stats.med_e = median_of_sorted(abs_err);
  return stats;
}

std::map<double, double> tolerance_accuracy(const std::vector<double>& y,
                                            const std::vector<double>& yhat,
                                            const std::vector<double>& taus) {
  if (y.size() != yhat.size())
    throw ShapeMismatch("tolerance_accuracy over " + std::to_string(y.size()) + " vs " +
                        std::to_string(yhat.size()) + " values");
  std::map<double, double> out;
  for (double tau : taus) {
    long hits = 0, counted = 0;
    for (size_t i = 0; i < y.size(); ++i) {
      if (std::fabs(y[i]) < kExclusionFloor) continue;
      ++counted;
      if (std::fabs(yhat[i] - y[i]) / std::fabs(y[i]) <= tau) ++hits;
    }
    if (counted == 0)
      throw EmptyAfterExclusion("every target fell below the tolerance exclusion floor");
    out[tau] = static_cast<double>(hits) / static_cast<double>(counted) * 100.0;
  }
  return out;
}

PrdStats prd_stats(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw ShapeMismatch("prd_stats over " + std::to_string(y.size()) + " vs " +
                        std::to_string(yhat.size()) + " values");
  PrdStats stats;
  std::vector<double> values;
  values.reserve(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    if (std::fabs(y[i] + yhat[i]) <= kExclusionFloor) {
      ++stats.excluded;
      continue;
    }
    values.push_back(prd(y[i], yhat[i]));
  }
  if (values.empty())
    throw EmptyAfterExclusion("every pair fell below the PRD exclusion floor");
  stats.min = values[0];
  for (double v : values) {
    stats.mean += v;
    stats.max = std::max(stats.max, v);
    stats.min = std::min(stats.min, v);
  }
  stats.mean /= static_cast<double>(values.size());
  for (double v : values) {
    const double d = v - stats.mean;
    stats.stdev += d * d;
  }
  stats.stdev = std::sqrt(stats.stdev / static_cast<double>(values.size()));
  stats.median = median_of_sorted(values);
  return stats;
}

DcpfSource::DcpfSource(const NetworkCase& base, const SolverConfig& config)
    : featured_(with_solved_q(base, config)) {}

std::vector<double> DcpfSource::predict_targets(const Sample& sample) {
  const NetworkCase perturbed = perturb_case(featured_, sample.meta.seed);
  const PFSolution sol = solve_dcpf(perturbed);
  std::vector<double> y;
  y.reserve(sol.v_mag.size() + sol.p_branch.size());
  y.insert(y.end(), sol.v_mag.begin(), sol.v_mag.end());
  y.insert(y.end(), sol.p_branch.begin(), sol.p_branch.end());
  return y;
}

AcpfSource::AcpfSource(const NetworkCase& base, const SolverConfig& config)
    : featured_(with_solved_q(base, config)), config_(config) {}

std::vector<double> AcpfSource::predict_targets(const Sample& sample) {
  const NetworkCase perturbed = perturb_case(featured_, sample.meta.seed);
  const PFSolution sol = solve_acpf(perturbed, config_);
  std::vector<double> y;
  y.reserve(sol.v_mag.size() + sol.p_branch.size());
  y.insert(y.end(), sol.v_mag.begin(), sol.v_mag.end());
  y.insert(y.end(), sol.p_branch.begin(), sol.p_branch.end());
  return y;
}

EvalReport evaluate(PredictionSource& source, const Dataset& ds, const NetworkCase& net,
                    const std::vector<double>& taus) {
  if (ds.val_idx.empty()) throw EmptyAfterExclusion("dataset has no validation split");
  if (net.n_buses() != ds.n_buses || net.n_branches() != ds.n_branches)
    throw ShapeMismatch("case '" + net.name + "' does not match dataset '" + ds.case_id + "'");

  const int n = ds.n_buses;
  const int k = ds.n_branches;
  const int t = ds.n_targets();

  EvalReport report;
  report.source = source.name();
  report.case_id = ds.case_id;
  report.n_eval = static_cast<int>(ds.val_idx.size());
  report.taus = taus;

  report.target_labels.reserve(t);
  for (int i = 0; i < n; ++i) report.target_labels.push_back("v:" + std::to_string(net.ids[i]));
  for (int b = 0; b < k; ++b)
    report.target_labels.push_back("p:" + std::to_string(net.ids[net.branches[b].from]) + "-" +
                                   std::to_string(net.ids[net.branches[b].to]) + "#" +
                                   std::to_string(b));

  std::vector<double> y_all, yh_all, y_flow, yh_flow, y_vmag, yh_vmag;
  y_all.reserve(static_cast<size_t>(report.n_eval) * t);
  yh_all.reserve(static_cast<size_t>(report.n_eval) * t);
  y_flow.reserve(static_cast<size_t>(report.n_eval) * k);
  yh_flow.reserve(static_cast<size_t>(report.n_eval) * k);
  y_vmag.reserve(static_cast<size_t>(report.n_eval) * n);
  yh_vmag.reserve(static_cast<size_t>(report.n_eval) * n);
  report.abs_err = linalg::Matrix(report.n_eval, t);

  for (size_t row = 0; row < ds.val_idx.size(); ++row) {
    const Sample& sample = ds.samples[ds.val_idx[row]];
    const std::vector<double> yhat = source.predict_targets(sample);
    if (static_cast<int>(yhat.size()) != t || static_cast<int>(sample.y.size()) != t)
      throw ShapeMismatch("prediction of " + std::to_string(yhat.size()) + " targets, expected " +
                          std::to_string(t));
    for (int c = 0; c < t; ++c) {
      report.abs_err(static_cast<int>(row), c) = std::fabs(yhat[c] - sample.y[c]);
      y_all.push_back(sample.y[c]);
      yh_all.push_back(yhat[c]);
      if (c < n) {
        y_vmag.push_back(sample.y[c]);
        yh_vmag.push_back(yhat[c]);
      } else {
        y_flow.push_back(sample.y[c]);
        yh_flow.push_back(yhat[c]);
      }
    }
  }

  report.r2 = r2_score(y_all, yh_all);
  report.r2_flows = r2_score(y_flow, yh_flow);
  report.r2_vmag = r2_score(y_vmag, yh_vmag);
  report.flow_err = error_stats(y_flow, yh_flow);
  report.vmag_err = error_stats(y_vmag, yh_vmag);
  report.flow_prd = prd_stats(y_flow, yh_flow);
  const auto acc = tolerance_accuracy(y_flow, yh_flow, taus);
  report.tau_acc.reserve(taus.size());
  for (double tau : taus) report.tau_acc.push_back(acc.at(tau));
  return report;
}

std::string report_to_json(const EvalReport& report, const Provenance& provenance) {
  nlohmann::ordered_json doc;
  doc["source"] = report.source;
  doc["case_id"] = report.case_id;
  doc["n_eval"] = report.n_eval;
  doc["r2"] = report.r2;
  doc["r2_flows"] = report.r2_flows;
  doc["r2_vmag"] = report.r2_vmag;
  doc["flow"] = {{"max_e_mw", report.flow_err.max_e},
                 {"med_e_mw", report.flow_err.med_e},
                 {"mape", report.flow_err.mape},
                 {"mape_excluded", report.flow_err.mape_excluded}};
  doc["vmag"] = {{"max_e_pu", report.vmag_err.max_e},
                 {"med_e_pu", report.vmag_err.med_e},
                 {"mape", report.vmag_err.mape},
                 {"mape_excluded", report.vmag_err.mape_excluded}};
  doc["flow_prd"] = {{"mean", report.flow_prd.mean},     {"max", report.flow_prd.max},
                     {"min", report.flow_prd.min},       {"median", report.flow_prd.median},
                     {"stdev", report.flow_prd.stdev},   {"excluded", report.flow_prd.excluded}};
  auto& jtol = doc["tolerance_accuracy"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < report.taus.size(); ++i)
    jtol.push_back({{"tau", report.taus[i]}, {"accuracy_pct", report.tau_acc[i]}});
  doc["provenance"] = {{"version", provenance.version},
                       {"config_hash", provenance.config_hash},
                       {"seed", provenance.seed}};
  return doc.dump(2) + "\n";
}

namespace {

std::string fixed(double v, int width, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%*.*f", width, places, v);
  return buf;
}

}  // namespace

std::string report_to_text(const EvalReport& report) {
  std::string out;
  out += "source: " + report.source + "  case: " + report.case_id + "  validation samples: " +
         std::to_string(report.n_eval) + "\n";
  out += "r2 (all targets): " + fixed(report.r2, 0, 6) + "\n";
  out += "r2 (flows):       " + fixed(report.r2_flows, 0, 6) + "\n";
  out += "r2 (voltages):    " + fixed(report.r2_vmag, 0, 6) + "\n";
  out += "branch flows (MW): max_e " + fixed(report.flow_err.max_e, 0, 4) + "  med_e " +
         fixed(report.flow_err.med_e, 0, 4) + "  mape " +
         fixed(report.flow_err.mape * 100.0, 0, 3) + "%  (excluded " +
         std::to_string(report.flow_err.mape_excluded) + ")\n";
  out += "voltages (p.u.):   max_e " + fixed(report.vmag_err.max_e, 0, 6) + "  med_e " +
         fixed(report.vmag_err.med_e, 0, 6) + "  mape " +
         fixed(report.vmag_err.mape * 100.0, 0, 3) + "%  (excluded " +
         std::to_string(report.vmag_err.mape_excluded) + ")\n";
  out += "flow prd (%): mean " + fixed(report.flow_prd.mean, 0, 3) + "  max " +
         fixed(report.flow_prd.max, 0, 3) + "  min " + fixed(report.flow_prd.min, 0, 3) +
         "  median " + fixed(report.flow_prd.median, 0, 3) + "  stdev " +
         fixed(report.flow_prd.stdev, 0, 3) + "  (excluded " +
         std::to_string(report.flow_prd.excluded) + ")\n";
  out += "tolerance accuracy (flows):\n";
  for (size_t i = 0; i < report.taus.size(); ++i)
    out += "  " + fixed(report.taus[i] * 100.0, 4, 1) + "%: " + fixed(report.tau_acc[i], 7, 3) +
           "%\n";
  return out;
}

std::string report_errors_csv(const EvalReport& report) {
  std::string out = "val_row";
  for (const auto& label : report.target_labels) out += "," + label;
  out += "\n";
  for (int i = 0; i < report.abs_err.rows; ++i) {
    out += std::to_string(i);
    for (int c = 0; c < report.abs_err.cols; ++c) out += "," + format_double(report.abs_err(i, c));
    out += "\n";
  }
  return out;
}

}  // namespace pflab
