#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pflab/dataset.hpp"
#include "pflab/linalg.hpp"
#include "pflab/models.hpp"
#include "pflab/network.hpp"
#include "pflab/provenance.hpp"
#include "pflab/solvers.hpp"

namespace pflab {

// Coefficient of determination, pooled over the whole vector.
double r2_score(const std::vector<double>& y, const std::vector<double>& yhat);

// Percent relative deviation of a single pair: 2|y - yhat| / |y + yhat| * 100.
// Near-cancelling pairs (|y + yhat| <= the exclusion floor) are rejected.
double prd(double y, double yhat);

// Exclusion threshold shared by MAPE, PRD, and tolerance accuracy: targets
// (or pair sums, for PRD) at or below this are skipped, not divided by.
inline constexpr double kExclusionFloor = 1e-6;

struct ErrorStats {
  double max_e = 0.0;
  double med_e = 0.0;  // median absolute error; mean of the middle two when even
  double mape = 0.0;   // fraction, over targets above the exclusion floor
  long mape_excluded = 0;

  bool operator==(const ErrorStats&) const = default;
};

ErrorStats error_stats(const std::vector<double>& y, const std::vector<double>& yhat);

// Percent of predictions with |yhat - y| / |y| <= tau, per tolerance, over
// targets above the exclusion floor.
std::map<double, double> tolerance_accuracy(const std::vector<double>& y,
                                            const std::vector<double>& yhat,
                                            const std::vector<double>& taus);

struct PrdStats {
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  double median = 0.0;
  double stdev = 0.0;  // population
  long excluded = 0;

  bool operator==(const PrdStats&) const = default;
};

PrdStats prd_stats(const std::vector<double>& y, const std::vector<double>& yhat);

// Anything that can map a dataset sample to a full target vector.
class PredictionSource {
 public:
  virtual ~PredictionSource() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> predict_targets(const Sample& sample) = 0;
};

class ModelSource : public PredictionSource {
 public:
  explicit ModelSource(const TrainedModel& model) : model_(&model) {}
  std::string name() const override { return to_string(model_->spec.kind); }
  std::vector<double> predict_targets(const Sample& sample) override {
    return model_->predict(sample.x);
  }

 private:
  const TrainedModel* model_;
};

// Replays each sample's perturbation from its recorded seed and solves the
// linearized flow; voltage magnitudes come out flat by construction.
class DcpfSource : public PredictionSource {
 public:
  DcpfSource(const NetworkCase& base, const SolverConfig& config);
  std::string name() const override { return "dcpf"; }
  std::vector<double> predict_targets(const Sample& sample) override;

 private:
  NetworkCase featured_;
};

// Replays and re-solves the full AC flow; matches the stored labels exactly.
class AcpfSource : public PredictionSource {
 public:
  AcpfSource(const NetworkCase& base, const SolverConfig& config);
  std::string name() const override { return "acpf"; }
  std::vector<double> predict_targets(const Sample& sample) override;

 private:
  NetworkCase featured_;
  SolverConfig config_;
};

struct EvalReport {
  std::string source;
  std::string case_id;
  int n_eval = 0;        // validation samples scored
  double r2 = 0.0;       // pooled over every target
  double r2_flows = 0.0;
  double r2_vmag = 0.0;
  ErrorStats flow_err;  // MW
  ErrorStats vmag_err;  // p.u.
  PrdStats flow_prd;    // percent
  std::vector<double> taus;
  std::vector<double> tau_acc;  // percent, aligned with taus
  std::vector<std::string> target_labels;
  linalg::Matrix abs_err;  // n_eval x n_targets, absolute errors
};

// Scores a source against the stored labels of the validation split.
EvalReport evaluate(PredictionSource& source, const Dataset& ds, const NetworkCase& net,
                    const std::vector<double>& taus);

std::string report_to_json(const EvalReport& report, const Provenance& provenance);
std::string report_to_text(const EvalReport& report);
std::string report_errors_csv(const EvalReport& report);

}  // namespace pflab
