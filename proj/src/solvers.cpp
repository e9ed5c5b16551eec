#include "pflab/solvers.hpp"

#include <cmath>
#include <complex>

#include "json.hpp"
#include "pflab/errors.hpp"

namespace pflab {

std::pair<std::vector<double>, std::vector<double>> scheduled_injection(const NetworkCase& net) {
  const int n = net.n_buses();
  std::vector<double> p(n, 0.0), q(n, 0.0);
  for (const auto& gen : net.generators) {
    p[gen.bus] += gen.p_set;
    q[gen.bus] += gen.q_set;
  }
  for (int i = 0; i < n; ++i) {
    p[i] = (p[i] - net.buses[i].p_load) / net.base_mva;
    q[i] = (q[i] - net.buses[i].q_load) / net.base_mva;
  }
  return {p, q};
}

std::pair<std::vector<double>, std::vector<double>> calculated_injection(
    const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang) {
  const int n = ybus.g.rows;
  if (static_cast<int>(v_mag.size()) != n || static_cast<int>(v_ang.size()) != n)
    throw ShapeMismatch("voltage state does not match " + std::to_string(n) + " buses");
  std::vector<double> p(n, 0.0), q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double pi = 0.0, qi = 0.0;
    for (int j = 0; j < n; ++j) {
      const double g = ybus.g(i, j);
      const double b = ybus.b(i, j);
      if (g == 0.0 && b == 0.0) continue;
      const double th = v_ang[i] - v_ang[j];
      const double c = std::cos(th);
      const double s = std::sin(th);
      pi += v_mag[j] * (g * c + b * s);
      qi += v_mag[j] * (g * s - b * c);
    }
    p[i] = v_mag[i] * pi;
    q[i] = v_mag[i] * qi;
  }
  return {p, q};
}

std::pair<std::vector<double>, std::vector<double>> compute_mismatch(
    const NetworkCase& net, const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang) {
  auto [ps, qs] = scheduled_injection(net);
  auto [pc, qc] = calculated_injection(ybus, v_mag, v_ang);
  const int n = net.n_buses();
  std::vector<double> dp(n), dq(n);
  for (int i = 0; i < n; ++i) {
    dp[i] = ps[i] - pc[i];
    dq[i] = qs[i] - qc[i];
  }
  return {dp, dq};
}

linalg::Matrix acpf_jacobian(const NetworkCase& net, const AdmittanceMatrix& ybus,
                             const std::vector<double>& v_mag, const std::vector<double>& v_ang) {
  const int n = net.n_buses();
  std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (net.buses[i].kind != BusKind::Slack) ang_pos[i] = m++;
  for (int i = 0; i < n; ++i)
    if (net.buses[i].kind == BusKind::PQ) mag_pos[i] = m++;

  auto [pc, qc] = calculated_injection(ybus, v_mag, v_ang);
  linalg::Matrix jac(m, m);
  for (int i = 0; i < n; ++i) {
    const int rp = ang_pos[i];
    const int rq = mag_pos[i];
    if (rp < 0 && rq < 0) continue;
    for (int j = 0; j < n; ++j) {
      const double g = ybus.g(i, j);
      const double b = ybus.b(i, j);
      if (i != j && g == 0.0 && b == 0.0) continue;
      double dp_dth, dp_dv, dq_dth, dq_dv;
      if (i == j) {
        dp_dth = -qc[i] - b * v_mag[i] * v_mag[i];
        dp_dv = pc[i] / v_mag[i] + g * v_mag[i];
        dq_dth = pc[i] - g * v_mag[i] * v_mag[i];
        dq_dv = qc[i] / v_mag[i] - b * v_mag[i];
      } else {
        const double th = v_ang[i] - v_ang[j];
        const double c = std::cos(th);
        const double s = std::sin(th);
        const double vij = v_mag[i] * v_mag[j];
        dp_dth = vij * (g * s - b * c);
        dp_dv = v_mag[i] * (g * c + b * s);
        dq_dth = -vij * (g * c + b * s);
        dq_dv = v_mag[i] * (g * s - b * c);
      }
      if (rp >= 0) {
        if (ang_pos[j] >= 0) jac(rp, ang_pos[j]) = dp_dth;
        if (mag_pos[j] >= 0) jac(rp, mag_pos[j]) = dp_dv;
      }
      if (rq >= 0) {
        if (ang_pos[j] >= 0) jac(rq, ang_pos[j]) = dq_dth;
        if (mag_pos[j] >= 0) jac(rq, mag_pos[j]) = dq_dv;
      }
    }
  }
  return jac;
}

namespace {

double masked_max_mismatch(const NetworkCase& net, const std::vector<double>& dp,
                           const std::vector<double>& dq) {
  double mm = 0.0;
  for (int i = 0; i < net.n_buses(); ++i) {
    if (net.buses[i].kind == BusKind::Slack) continue;
    mm = std::max(mm, std::fabs(dp[i]));
    if (net.buses[i].kind == BusKind::PQ) mm = std::max(mm, std::fabs(dq[i]));
  }
  return mm;
}

}  // namespace

PFSolution solve_acpf(const NetworkCase& net, const SolverConfig& config) {
  const int n = net.n_buses();
  const AdmittanceMatrix ybus = build_ybus(net);

  PFSolution sol;
  sol.v_mag.resize(n);
  sol.v_ang.resize(n);
  for (int i = 0; i < n; ++i) {
    const Bus& bus = net.buses[i];
    if (config.flat_start) {
      sol.v_mag[i] = bus.kind == BusKind::PQ ? 1.0 : bus.v_mag;
      sol.v_ang[i] = 0.0;
    } else {
      sol.v_mag[i] = bus.v_mag;
      // The slack is the angle reference and stays pinned at zero.
      sol.v_ang[i] = bus.kind == BusKind::Slack ? 0.0 : bus.v_ang;
    }
  }

  std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (net.buses[i].kind != BusKind::Slack) ang_pos[i] = m++;
  for (int i = 0; i < n; ++i)
    if (net.buses[i].kind == BusKind::PQ) mag_pos[i] = m++;

  int steps = 0;
  while (true) {
    auto [dp, dq] = compute_mismatch(net, ybus, sol.v_mag, sol.v_ang);
    sol.max_mismatch = masked_max_mismatch(net, dp, dq);
    if (sol.max_mismatch <= config.tolerance) {
      sol.converged = true;
      break;
    }
    if (steps >= config.max_iter) break;

    std::vector<double> rhs(m, 0.0);
    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) rhs[ang_pos[i]] = dp[i];
      if (mag_pos[i] >= 0) rhs[mag_pos[i]] = dq[i];
    }
    const linalg::Matrix jac = acpf_jacobian(net, ybus, sol.v_mag, sol.v_ang);
    std::vector<double> dx;
    if (!linalg::lu_solve(jac, rhs, dx))
      throw SingularJacobian("case '" + net.name + "' at iteration " + std::to_string(steps + 1));
    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) sol.v_ang[i] += dx[ang_pos[i]];
      if (mag_pos[i] >= 0) sol.v_mag[i] += dx[mag_pos[i]];
    }
    ++steps;
  }
  sol.iterations = steps;

  auto [pf, qf] = branch_flows_ac(net, ybus, sol.v_mag, sol.v_ang);
  sol.p_branch = std::move(pf);
  sol.q_branch = std::move(qf);
  return sol;
}

PFSolution solve_dcpf(const NetworkCase& net) {
  const int n = net.n_buses();
  const int slack = net.slack();
  std::vector<int> pos(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (i != slack) pos[i] = m++;

  // Susceptance from series reactance alone; resistance, charging, and taps
  // drop out of the linearized model.
  linalg::Matrix bprime(m, m);
  for (const auto& br : net.branches) {
    const double w = 1.0 / br.x;
    const int f = pos[br.from];
    const int t = pos[br.to];
    if (f >= 0) bprime(f, f) += w;
    if (t >= 0) bprime(t, t) += w;
    if (f >= 0 && t >= 0) {
      bprime(f, t) -= w;
      bprime(t, f) -= w;
    }
  }

  auto [ps, qs] = scheduled_injection(net);
  (void)qs;
  std::vector<double> rhs(m, 0.0);
  for (int i = 0; i < n; ++i)
    if (pos[i] >= 0) rhs[pos[i]] = ps[i];

  std::vector<double> theta;
  if (!linalg::lu_solve(bprime, rhs, theta))
    throw SingularBprime("case '" + net.name + "'");

  PFSolution sol;
  sol.v_mag.assign(n, 1.0);
  sol.v_ang.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (pos[i] >= 0) sol.v_ang[i] = theta[pos[i]];

  sol.p_branch.reserve(net.n_branches());
  sol.q_branch.assign(net.n_branches(), 0.0);
  for (const auto& br : net.branches)
    sol.p_branch.push_back((sol.v_ang[br.from] - sol.v_ang[br.to]) / br.x * net.base_mva);
  sol.converged = true;
  sol.iterations = 0;
  sol.max_mismatch = 0.0;
  return sol;
}

std::pair<std::vector<double>, std::vector<double>> branch_flows_ac(
    const NetworkCase& net, const AdmittanceMatrix& ybus, const std::vector<double>& v_mag,
    const std::vector<double>& v_ang) {
  (void)ybus;
  std::vector<double> p, q;
  p.reserve(net.n_branches());
  q.reserve(net.n_branches());
  for (const auto& br : net.branches) {
    const std::complex<double> vf = std::polar(v_mag[br.from], v_ang[br.from]);
    const std::complex<double> vt = std::polar(v_mag[br.to], v_ang[br.to]);
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> shunt(0.0, br.b / 2.0);
    const double t = br.tap;
    const std::complex<double> cur = ((ys + shunt) / (t * t)) * vf + (-ys / t) * vt;
    const std::complex<double> s = vf * std::conj(cur) * net.base_mva;
    p.push_back(s.real());
    q.push_back(s.imag());
  }
  return {p, q};
}

std::string solution_to_json(const NetworkCase& net, const PFSolution& sol,
                             const Provenance& provenance) {
  nlohmann::ordered_json doc;
  doc["case"] = net.name;
  doc["converged"] = sol.converged;
  doc["iterations"] = sol.iterations;
  doc["max_mismatch"] = sol.max_mismatch;
  auto& jbuses = doc["buses"] = nlohmann::ordered_json::array();
  for (int i = 0; i < net.n_buses(); ++i)
    jbuses.push_back({{"id", net.ids[i]}, {"v_mag", sol.v_mag[i]}, {"v_ang", sol.v_ang[i]}});
  auto& jbranches = doc["branches"] = nlohmann::ordered_json::array();
  for (int k = 0; k < net.n_branches(); ++k)
    jbranches.push_back({{"from", net.ids[net.branches[k].from]},
                         {"to", net.ids[net.branches[k].to]},
                         {"p_mw", sol.p_branch[k]},
                         {"q_mvar", sol.q_branch[k]}});
  doc["provenance"] = {{"version", provenance.version},
                       {"config_hash", provenance.config_hash},
                       {"seed", provenance.seed}};
  return doc.dump(2) + "\n";
}

}  // namespace pflab
