#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pflab/network.hpp"
#include "pflab/provenance.hpp"

namespace pflab {

struct SolverConfig {
  double tolerance = 1e-8;  // max p.u. mismatch
  int max_iter = 20;
  bool flat_start = true;
};

struct PFSolution {
  std::vector<double> v_mag;     // p.u., per bus
  std::vector<double> v_ang;     // rad, per bus; slack pinned at its initial angle
  std::vector<double> p_branch;  // MW, from-end active flow per branch
  std::vector<double> q_branch;  // MVar, from-end reactive flow per branch
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;  // p.u., at exit
};

// Scheduled net injections (generation minus load) in p.u. for every bus.
std::pair<std::vector<double>, std::vector<double>> scheduled_injection(const NetworkCase& net);

// Calculated net injections at a voltage state, p.u.
std::pair<std::vector<double>, std::vector<double>> calculated_injection(
    const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang);

// Power mismatch (scheduled minus calculated), p.u., full length for every
// bus; callers ignore the slack rows and PV reactive rows.
std::pair<std::vector<double>, std::vector<double>> compute_mismatch(
    const NetworkCase& net, const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang);

// Newton step matrix in polar form. Row and column order is all non-slack
// angles (bus order), then all PQ magnitudes (bus order); J * dx = mismatch.
linalg::Matrix acpf_jacobian(const NetworkCase& net, const AdmittanceMatrix& ybus,
                             const std::vector<double>& v_mag, const std::vector<double>& v_ang);

PFSolution solve_acpf(const NetworkCase& net, const SolverConfig& config = {});

// Linearized flow: angles from B'theta = P, flat magnitudes, lossless.
PFSolution solve_dcpf(const NetworkCase& net);

// From-end branch flows (MW, MVar) at a voltage state.
std::pair<std::vector<double>, std::vector<double>> branch_flows_ac(
    const NetworkCase& net, const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang);

std::string solution_to_json(const NetworkCase& net, const PFSolution& sol,
                             const Provenance& provenance);

}  // namespace pflab
