#include "pflab/network.hpp"

#include <cmath>
#include <complex>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pflab/errors.hpp"
#include "pflab/provenance.hpp"

namespace pflab {

using nlohmann::ordered_json;

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack: return "Slack";
    case BusKind::PV: return "PV";
    case BusKind::PQ: return "PQ";
  }
  return "PQ";
}

BusKind bus_kind_from_string(const std::string& s) {
  if (s == "Slack") return BusKind::Slack;
  if (s == "PV") return BusKind::PV;
  if (s == "PQ") return BusKind::PQ;
  throw MalformedCase("unknown bus kind '" + s + "'");
}

int NetworkCase::slack() const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].kind == BusKind::Slack) return i;
  throw NoSlackBus("case '" + name + "' has no slack bus");
}

int NetworkCase::index_of(int external_id) const {
  for (int i = 0; i < n_buses(); ++i)
    if (ids[i] == external_id) return i;
  return -1;
}

namespace {

const ordered_json& field(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedCase(std::string("missing field '") + key + "'");
  return *it;
}

double num(const ordered_json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_number()) throw MalformedCase(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double num_or(const ordered_json& obj, const char* key, double dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_number()) throw MalformedCase(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

int integer(const ordered_json& obj, const char* key) {
  const double v = num(obj, key);
  const int i = static_cast<int>(std::llround(v));
  if (static_cast<double>(i) != v)
    throw MalformedCase(std::string("field '") + key + "' must be an integer");
  return i;
}

void check_connected(const NetworkCase& net) {
  const int n = net.n_buses();
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : net.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  if (reached != n) {
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        throw DisconnectedGraph("bus " + std::to_string(net.ids[i]) +
                                " is unreachable from bus " + std::to_string(net.ids[0]));
  }
}

}  // namespace

NetworkCase parse_case(const std::string& text, const std::string& name) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedCase(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedCase("top level must be an object");

  NetworkCase net;
  net.name = name;
  net.base_mva = num(doc, "base_mva");
  if (!(net.base_mva > 0.0)) throw MalformedCase("base_mva must be positive");

  const auto& jbuses = field(doc, "buses");
  const auto& jbranches = field(doc, "branches");
  if (!jbuses.is_array() || !jbranches.is_array())
    throw MalformedCase("'buses' and 'branches' must be arrays");
  if (jbuses.size() < 2) throw MalformedCase("a case needs at least 2 buses");
  if (jbranches.empty()) throw MalformedCase("a case needs at least 1 branch");

  std::unordered_map<int, int> index_of;
  int slack_count = 0;
  for (const auto& jb : jbuses) {
    if (!jb.is_object()) throw MalformedCase("each bus must be an object");
    const int id = integer(jb, "id");
    if (index_of.count(id)) throw MalformedCase("duplicate bus id " + std::to_string(id));
    index_of[id] = net.n_buses();
    net.ids.push_back(id);

    Bus bus;
    const auto& kind = field(jb, "kind");
    if (!kind.is_string()) throw MalformedCase("bus kind must be a string");
    bus.kind = bus_kind_from_string(kind.get<std::string>());
    if (bus.kind == BusKind::Slack) ++slack_count;
    bus.v_mag = num(jb, "v_mag");
    if (!(bus.v_mag > 0.0))
      throw MalformedCase("bus " + std::to_string(id) + " v_mag must be positive");
    bus.v_ang = num_or(jb, "v_ang", 0.0);
    bus.p_load = num_or(jb, "p_load", 0.0);
    bus.q_load = num_or(jb, "q_load", 0.0);
    bus.base_kv = num_or(jb, "base_kv", 0.0);
    net.buses.push_back(bus);
  }
  if (slack_count == 0) throw NoSlackBus("case '" + name + "' declares no Slack bus");
  if (slack_count > 1)
    throw DuplicateSlack("case '" + name + "' declares " + std::to_string(slack_count) +
                         " Slack buses");

  for (const auto& jb : jbranches) {
    if (!jb.is_object()) throw MalformedCase("each branch must be an object");
    Branch br;
    const int from_id = integer(jb, "from");
    const int to_id = integer(jb, "to");
    auto from_it = index_of.find(from_id);
    auto to_it = index_of.find(to_id);
    if (from_it == index_of.end() || to_it == index_of.end())
      throw MalformedCase("branch " + std::to_string(from_id) + "-" + std::to_string(to_id) +
                          " references an unknown bus");
    if (from_id == to_id)
      throw MalformedCase("branch at bus " + std::to_string(from_id) + " is a self-loop");
    br.from = from_it->second;
    br.to = to_it->second;
    br.r = num(jb, "r");
    br.x = num(jb, "x");
    if (br.x == 0.0)
      throw ZeroImpedanceBranch("branch " + std::to_string(from_id) + "-" +
                                std::to_string(to_id) + " has zero reactance");
    br.b = num_or(jb, "b", 0.0);
    br.tap = num_or(jb, "tap", 1.0);
    if (!(br.tap > 0.0))
      throw MalformedCase("branch " + std::to_string(from_id) + "-" + std::to_string(to_id) +
                          " tap must be positive");
    br.rating = num_or(jb, "rating", 0.0);
    net.branches.push_back(br);
  }

  if (auto it = doc.find("generators"); it != doc.end()) {
    if (!it->is_array()) throw MalformedCase("'generators' must be an array");
    for (const auto& jg : *it) {
      if (!jg.is_object()) throw MalformedCase("each generator must be an object");
      Generator gen;
      const int bus_id = integer(jg, "bus");
      auto bus_it = index_of.find(bus_id);
      if (bus_it == index_of.end())
        throw MalformedCase("generator references unknown bus " + std::to_string(bus_id));
      gen.bus = bus_it->second;
      gen.p_set = num(jg, "p_set");
      gen.q_set = num_or(jg, "q_set", 0.0);
      gen.v_set = num(jg, "v_set");
      if (!(gen.v_set > 0.0))
        throw MalformedCase("generator at bus " + std::to_string(bus_id) +
                            " v_set must be positive");
      gen.p_max = num_or(jg, "p_max", 0.0);
      gen.p_min = num_or(jg, "p_min", 0.0);
      net.generators.push_back(gen);
    }
  }

  check_connected(net);
  return net;
}

NetworkCase load_case(const std::string& path) {
  std::string stem = path;
  if (auto pos = stem.find_last_of("/\\"); pos != std::string::npos) stem = stem.substr(pos + 1);
  if (auto pos = stem.rfind('.'); pos != std::string::npos) stem = stem.substr(0, pos);
  return parse_case(read_file(path), stem);
}

std::string emit_case(const NetworkCase& net) {
  ordered_json doc;
  doc["base_mva"] = net.base_mva;
  auto& jbuses = doc["buses"] = ordered_json::array();
  for (int i = 0; i < net.n_buses(); ++i) {
    const Bus& bus = net.buses[i];
    jbuses.push_back({{"id", net.ids[i]},
                      {"kind", to_string(bus.kind)},
                      {"v_mag", bus.v_mag},
                      {"v_ang", bus.v_ang},
                      {"p_load", bus.p_load},
                      {"q_load", bus.q_load},
                      {"base_kv", bus.base_kv}});
  }
  auto& jbranches = doc["branches"] = ordered_json::array();
  for (const auto& br : net.branches) {
    jbranches.push_back({{"from", net.ids[br.from]},
                         {"to", net.ids[br.to]},
                         {"r", br.r},
                         {"x", br.x},
                         {"b", br.b},
                         {"tap", br.tap},
                         {"rating", br.rating}});
  }
  auto& jgens = doc["generators"] = ordered_json::array();
  for (const auto& gen : net.generators) {
    jgens.push_back({{"bus", net.ids[gen.bus]},
                     {"p_set", gen.p_set},
                     {"q_set", gen.q_set},
                     {"v_set", gen.v_set},
                     {"p_max", gen.p_max},
                     {"p_min", gen.p_min}});
  }
  return doc.dump(2) + "\n";
}

AdmittanceMatrix build_ybus(const NetworkCase& net) {
  const int n = net.n_buses();
  AdmittanceMatrix y{linalg::Matrix(n, n), linalg::Matrix(n, n)};
  for (const auto& br : net.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw ZeroImpedanceBranch("branch " + std::to_string(net.ids[br.from]) + "-" +
                                std::to_string(net.ids[br.to]) + " has zero impedance");
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> shunt(0.0, br.b / 2.0);
    const double t = br.tap;
    const std::complex<double> yff = (ys + shunt) / (t * t);
    const std::complex<double> ytt = ys + shunt;
    const std::complex<double> yft = -ys / t;
    y.g(br.from, br.from) += yff.real();
    y.b(br.from, br.from) += yff.imag();
    y.g(br.to, br.to) += ytt.real();
    y.b(br.to, br.to) += ytt.imag();
    y.g(br.from, br.to) += yft.real();
    y.b(br.from, br.to) += yft.imag();
    y.g(br.to, br.from) += yft.real();
    y.b(br.to, br.from) += yft.imag();
  }
  return y;
}

linalg::Matrix build_adjacency(const NetworkCase& net) {
  const int n = net.n_buses();
  linalg::Matrix a(n, n);
  for (const auto& br : net.branches) {
    a(br.from, br.to) = 1.0;
    a(br.to, br.from) = 1.0;
  }
  return a;
}

linalg::Matrix renormalize_adjacency(const linalg::Matrix& adjacency) {
  if (adjacency.rows != adjacency.cols)
    throw ShapeMismatch("adjacency must be square, got " + std::to_string(adjacency.rows) + "x" +
                        std::to_string(adjacency.cols));
  const int n = adjacency.rows;
  linalg::Matrix v(n, n);
  std::vector<double> dinv(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double deg = 1.0;  // the added self-loop
    for (int j = 0; j < n; ++j) deg += adjacency(i, j);
    dinv[i] = 1.0 / std::sqrt(deg);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double aij = (i == j) ? adjacency(i, j) + 1.0 : adjacency(i, j);
      v(i, j) = dinv[i] * aij * dinv[j];
    }
  }
  return v;
}

}  // namespace pflab
