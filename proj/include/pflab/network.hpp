#pragma once

#include <string>
#include <vector>

#include "pflab/linalg.hpp"

namespace pflab {

enum class BusKind { Slack, PV, PQ };

std::string to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& s);

struct Bus {
  BusKind kind = BusKind::PQ;
  double v_mag = 1.0;  // initial magnitude, p.u.; setpoint on Slack/PV buses
  double v_ang = 0.0;  // initial angle, rad
  double p_load = 0.0; // MW
  double q_load = 0.0; // MVar
  double base_kv = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from = 0;  // dense bus index
  int to = 0;
  double r = 0.0;       // p.u. series resistance
  double x = 0.0;       // p.u. series reactance
  double b = 0.0;       // p.u. total line charging
  double tap = 1.0;     // from-side off-nominal ratio
  double rating = 0.0;  // MVA, informational

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;  // dense bus index
  double p_set = 0.0;  // MW
  double q_set = 0.0;  // MVar
  double v_set = 1.0;  // p.u.
  double p_max = 0.0;  // MW
  double p_min = 0.0;  // MW

  bool operator==(const Generator&) const = default;
};

// Validated grid model. Buses are held in dense order 0..N-1; `ids[i]` is the
// external bus number used in case files and printed output.
struct NetworkCase {
  std::string name = "case";
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<int> ids;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_branches() const { return static_cast<int>(branches.size()); }
  int slack() const;
  int index_of(int external_id) const;  // -1 when absent

  bool operator==(const NetworkCase& o) const {
    return base_mva == o.base_mva && buses == o.buses && ids == o.ids &&
           branches == o.branches && generators == o.generators;
  }
};

// Bus admittance matrix split into real and imaginary parts: Y = G + jB.
struct AdmittanceMatrix {
  linalg::Matrix g;
  linalg::Matrix b;
};

NetworkCase parse_case(const std::string& text, const std::string& name = "case");
NetworkCase load_case(const std::string& path);
std::string emit_case(const NetworkCase& net);

AdmittanceMatrix build_ybus(const NetworkCase& net);

// 0/1 bus adjacency from the branch list: symmetric, zero diagonal,
// parallel branches collapse to a single edge.
linalg::Matrix build_adjacency(const NetworkCase& net);

// V = D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
linalg::Matrix renormalize_adjacency(const linalg::Matrix& adjacency);

}  // namespace pflab
