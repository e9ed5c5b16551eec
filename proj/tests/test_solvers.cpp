#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "pflab/errors.hpp"
#include "pflab/network.hpp"
#include "pflab/provenance.hpp"
#include "pflab/solvers.hpp"

using namespace pflab;

namespace {

// Generation minus load minus losses, in MW, with the slack injection taken
// from the converged state.
double power_balance_mw(const NetworkCase& net, const PFSolution& sol) {
  AdmittanceMatrix ybus = build_ybus(net);
  auto [pc, qc] = calculated_injection(ybus, sol.v_mag, sol.v_ang);
  const int slack = net.slack();
  double losses = 0.0;
  for (int i = 0; i < net.n_buses(); ++i) losses += pc[static_cast<size_t>(i)] * net.base_mva;

  double gen = pc[static_cast<size_t>(slack)] * net.base_mva +
               net.buses[static_cast<size_t>(slack)].p_load;
  for (const auto& g : net.generators)
    if (g.bus != slack) gen += g.p_set;
  double load = 0.0;
  for (const auto& bus : net.buses) load += bus.p_load;
  return gen - load - losses;
}

}  // namespace

TEST_CASE("mismatch at flat start") {
  NetworkCase net = testutil::two_bus();
  AdmittanceMatrix ybus = build_ybus(net);
  std::vector<double> vm{1.0, 1.0}, va{0.0, 0.0};
  auto [dp, dq] = compute_mismatch(net, ybus, vm, va);
  CHECK(dp[1] == doctest::Approx(-1.0));
  CHECK(dq[1] == doctest::Approx(0.0));
}

TEST_CASE("mismatch vanishes with no injections") {
  std::string text = testutil::two_bus_json();
  const std::string load = "\"p_load\": 100.0";
  text.replace(text.find(load), load.size(), "\"p_load\": 0.0");
  NetworkCase net = parse_case(text);
  AdmittanceMatrix ybus = build_ybus(net);
  std::vector<double> vm{1.0, 1.0}, va{0.0, 0.0};
  auto [dp, dq] = compute_mismatch(net, ybus, vm, va);
  for (double v : dp) CHECK(v == doctest::Approx(0.0));
  for (double v : dq) CHECK(v == doctest::Approx(0.0));

  PFSolution sol = solve_acpf(net);
  CHECK(sol.converged);
  CHECK(sol.iterations <= 1);
  CHECK(sol.v_mag[1] == doctest::Approx(1.0));
}

TEST_CASE("acpf matches the closed-form two-bus solution") {
  // u^2 - u + 0.01 = 0 for u = V2^2, high root; theta2 = asin(-0.2)/2
  const double u = (1.0 + std::sqrt(1.0 - 0.04)) / 2.0;
  const double v2 = std::sqrt(u);
  const double th2 = 0.5 * std::asin(-0.2);

  PFSolution sol = solve_acpf(testutil::two_bus());
  REQUIRE(sol.converged);
  CHECK(sol.v_ang[0] == 0.0);  // slack angle is pinned exactly
  CHECK(sol.v_mag[0] == 1.0);
  CHECK(sol.v_mag[1] == doctest::Approx(v2).epsilon(1e-9));
  CHECK(sol.v_ang[1] == doctest::Approx(th2).epsilon(1e-9));
  CHECK(sol.v_mag[1] == doctest::Approx(0.99494).epsilon(1e-4));
  CHECK(sol.v_ang[1] == doctest::Approx(-0.10068).epsilon(1e-4));

  // lossless line delivers the scheduled 100 MW at the from end
  CHECK(sol.p_branch[0] == doctest::Approx(100.0).epsilon(1e-8));
}

TEST_CASE("acpf solves the 14-bus case to reference values") {
  NetworkCase net = load_case("cases/ieee14.json");
  PFSolution sol = solve_acpf(net);
  REQUIRE(sol.converged);
  CHECK(sol.iterations <= 6);
  CHECK(sol.max_mismatch <= 1e-8);

  // spot values from an independent reference solution of the bundled case
  CHECK(sol.v_mag[0] == 1.06);
  CHECK(sol.v_mag[3] == doctest::Approx(1.01423).epsilon(2e-5));
  CHECK(sol.v_mag[9] == doctest::Approx(1.03256).epsilon(2e-5));
  CHECK(sol.v_mag[13] == doctest::Approx(1.02131).epsilon(2e-5));
  CHECK(sol.v_ang[1] * 180.0 / M_PI == doctest::Approx(-4.9874).epsilon(1e-3));
  CHECK(sol.v_ang[13] * 180.0 / M_PI == doctest::Approx(-16.0647).epsilon(1e-3));
  CHECK(sol.p_branch[0] == doctest::Approx(157.0269).epsilon(1e-3));

  double losses = 0.0;
  {
    AdmittanceMatrix ybus = build_ybus(net);
    auto [pc, qc] = calculated_injection(ybus, sol.v_mag, sol.v_ang);
    for (double p : pc) losses += p * net.base_mva;
  }
  CHECK(losses == doctest::Approx(13.5508).epsilon(1e-3));
  CHECK(std::fabs(power_balance_mw(net, sol)) < 1e-4);
}

TEST_CASE("acpf solves the 24-bus case to reference values") {
  NetworkCase net = load_case("cases/ieee24.json");
  PFSolution sol = solve_acpf(net);
  REQUIRE(sol.converged);
  CHECK(sol.iterations <= 6);
  CHECK(sol.max_mismatch <= 1e-8);
  CHECK(sol.v_mag[net.index_of(6)] == doctest::Approx(1.086515).epsilon(2e-5));

  double losses = 0.0;
  {
    AdmittanceMatrix ybus = build_ybus(net);
    auto [pc, qc] = calculated_injection(ybus, sol.v_mag, sol.v_ang);
    for (double p : pc) losses += p * net.base_mva;
  }
  CHECK(losses == doctest::Approx(52.5679).epsilon(1e-3));
  CHECK(std::fabs(power_balance_mw(net, sol)) < 1e-4);
}

TEST_CASE("acpf fails cleanly past the nose point") {
  std::string text = testutil::two_bus_json();
  const std::string load = "\"p_load\": 100.0";
  text.replace(text.find(load), load.size(), "\"p_load\": 2000.0");  // infeasible transfer
  NetworkCase net = parse_case(text);
  SolverConfig config;
  config.max_iter = 15;
  // The iteration either runs out of budget or walks into a singular
  // Jacobian near voltage collapse; both are clean failures, not hangs.
  try {
    PFSolution sol = solve_acpf(net, config);
    CHECK_FALSE(sol.converged);
  } catch (const SingularJacobian&) {
    CHECK(true);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  NetworkCase net = load_case("cases/ieee14.json");
  AdmittanceMatrix ybus = build_ybus(net);
  const int n = net.n_buses();
  const int slack = net.slack();

  std::vector<double> vm(static_cast<size_t>(n)), va(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    vm[static_cast<size_t>(i)] = net.buses[static_cast<size_t>(i)].v_mag;
    va[static_cast<size_t>(i)] = 0.01 * i;  // generic off-flat point
  }

  std::vector<int> ang_vars, mag_vars;
  for (int i = 0; i < n; ++i) {
    if (i != slack) ang_vars.push_back(i);
    if (net.buses[static_cast<size_t>(i)].kind == BusKind::PQ) mag_vars.push_back(i);
  }
  const int m = static_cast<int>(ang_vars.size() + mag_vars.size());

  // residual vector matching the jacobian's row order; J dx = mismatch means
  // J = -d(mismatch)/dx = d(calculated)/dx
  auto residual = [&](const std::vector<double>& vmag, const std::vector<double>& vang) {
    auto [dp, dq] = compute_mismatch(net, ybus, vmag, vang);
    std::vector<double> r;
    for (int i : ang_vars) r.push_back(dp[static_cast<size_t>(i)]);
    for (int i : mag_vars) r.push_back(dq[static_cast<size_t>(i)]);
    return r;
  };

  linalg::Matrix jac = acpf_jacobian(net, ybus, vm, va);
  REQUIRE(jac.rows == m);
  REQUIRE(jac.cols == m);

  const double h = 1e-6;
  for (int col = 0; col < m; ++col) {
    std::vector<double> vm_hi = vm, vm_lo = vm, va_hi = va, va_lo = va;
    if (col < static_cast<int>(ang_vars.size())) {
      const int bus = ang_vars[static_cast<size_t>(col)];
      va_hi[static_cast<size_t>(bus)] += h;
      va_lo[static_cast<size_t>(bus)] -= h;
    } else {
      const int bus = mag_vars[static_cast<size_t>(col - ang_vars.size())];
      vm_hi[static_cast<size_t>(bus)] += h;
      vm_lo[static_cast<size_t>(bus)] -= h;
    }
    std::vector<double> r_hi = residual(vm_hi, va_hi);
    std::vector<double> r_lo = residual(vm_lo, va_lo);
    for (int row = 0; row < m; ++row) {
      const double fd = -(r_hi[static_cast<size_t>(row)] - r_lo[static_cast<size_t>(row)]) / (2.0 * h);
      CHECK(jac(row, col) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("dcpf solves the two-bus case exactly") {
  PFSolution sol = solve_dcpf(testutil::two_bus());
  REQUIRE(sol.converged);
  CHECK(sol.v_ang[0] == 0.0);
  CHECK(sol.v_ang[1] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(sol.p_branch[0] == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(sol.v_mag[0] == 1.0);
  CHECK(sol.v_mag[1] == 1.0);
  CHECK(sol.q_branch[0] == 0.0);
}

TEST_CASE("dcpf with zero injections is identically flat") {
  std::string text = testutil::two_bus_json();
  const std::string load = "\"p_load\": 100.0";
  text.replace(text.find(load), load.size(), "\"p_load\": 0.0");
  PFSolution sol = solve_dcpf(parse_case(text));
  CHECK(sol.v_ang[1] == 0.0);
  CHECK(sol.p_branch[0] == 0.0);
}

TEST_CASE("dcpf satisfies nodal balance exactly and is lossless") {
  NetworkCase net = load_case("cases/ieee14.json");
  PFSolution sol = solve_dcpf(net);
  REQUIRE(sol.converged);

  auto [ps, qs] = scheduled_injection(net);
  const int slack = net.slack();
  std::vector<double> net_flow(static_cast<size_t>(net.n_buses()), 0.0);
  for (int k = 0; k < net.n_branches(); ++k) {
    const auto& br = net.branches[static_cast<size_t>(k)];
    net_flow[static_cast<size_t>(br.from)] += sol.p_branch[static_cast<size_t>(k)];
    net_flow[static_cast<size_t>(br.to)] -= sol.p_branch[static_cast<size_t>(k)];
  }
  for (int i = 0; i < net.n_buses(); ++i) {
    if (i == slack) continue;
    CHECK(net_flow[static_cast<size_t>(i)] ==
          doctest::Approx(ps[static_cast<size_t>(i)] * net.base_mva).epsilon(1e-9));
  }
  // lossless: flows out of the slack equal everything consumed elsewhere
  double total = 0.0;
  for (int i = 0; i < net.n_buses(); ++i)
    if (i != slack) total += ps[static_cast<size_t>(i)] * net.base_mva;
  CHECK(net_flow[static_cast<size_t>(slack)] == doctest::Approx(-total).epsilon(1e-9));
}

TEST_CASE("dc linearization tracks ac on a light lossless network") {
  const std::string text = R"({
    "base_mva": 100.0,
    "buses": [
      {"id": 1, "kind": "Slack", "v_mag": 1.0},
      {"id": 2, "kind": "PQ", "v_mag": 1.0, "p_load": 5.0},
      {"id": 3, "kind": "PQ", "v_mag": 1.0, "p_load": 5.0}
    ],
    "branches": [
      {"from": 1, "to": 2, "r": 0.0, "x": 0.2},
      {"from": 2, "to": 3, "r": 0.0, "x": 0.2}
    ]
  })";
  NetworkCase net = parse_case(text);
  PFSolution ac = solve_acpf(net);
  PFSolution dc = solve_dcpf(net);
  REQUIRE(ac.converged);
  for (int i = 0; i < net.n_buses(); ++i)
    CHECK(dc.v_ang[static_cast<size_t>(i)] ==
          doctest::Approx(ac.v_ang[static_cast<size_t>(i)]).epsilon(0.01));
  for (int k = 0; k < net.n_branches(); ++k)
    CHECK(dc.p_branch[static_cast<size_t>(k)] ==
          doctest::Approx(ac.p_branch[static_cast<size_t>(k)]).epsilon(0.01));
}

TEST_CASE("ac branch flows are passive") {
  NetworkCase net = load_case("cases/ieee14.json");
  PFSolution sol = solve_acpf(net);
  REQUIRE(sol.converged);

  // to-end flows come from a copy with every branch orientation swapped;
  // taps make the swapped element a different device, so check tap-1 lines
  NetworkCase rev = net;
  for (auto& br : rev.branches) std::swap(br.from, br.to);
  AdmittanceMatrix yrev = build_ybus(rev);
  auto [p_to, q_to] = branch_flows_ac(rev, yrev, sol.v_mag, sol.v_ang);
  int checked = 0;
  for (int k = 0; k < net.n_branches(); ++k) {
    if (net.branches[static_cast<size_t>(k)].tap != 1.0) continue;
    const double loss = sol.p_branch[static_cast<size_t>(k)] + p_to[static_cast<size_t>(k)];
    CHECK(loss >= -1e-9);  // from + to = I^2 R >= 0
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("solution_to_json carries provenance and full vectors") {
  NetworkCase net = testutil::two_bus();
  PFSolution sol = solve_acpf(net);
  Provenance prov{kVersion, "deadbeef", 42};
  auto doc = nlohmann::json::parse(solution_to_json(net, sol, prov));
  CHECK(doc["provenance"]["version"] == kVersion);
  CHECK(doc["provenance"]["config_hash"] == "deadbeef");
  CHECK(doc["provenance"]["seed"] == 42);
  CHECK(doc["converged"] == true);
  CHECK(doc["buses"].size() == 2);
  CHECK(doc["branches"].size() == 1);
  CHECK(doc["buses"][0]["v_mag"] == 1.0);
  CHECK(doc["branches"][0]["p_mw"].get<double>() == doctest::Approx(100.0).epsilon(1e-8));
}
