#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pflab/errors.hpp"
#include "pflab/network.hpp"
#include "pflab/rng.hpp"

using namespace pflab;
using linalg::Matrix;

TEST_CASE("parse_case reads the two-bus fixture") {
  NetworkCase net = testutil::two_bus();
  REQUIRE(net.n_buses() == 2);
  REQUIRE(net.n_branches() == 1);
  CHECK(net.base_mva == 100.0);
  CHECK(net.buses[0].kind == BusKind::Slack);
  CHECK(net.buses[1].kind == BusKind::PQ);
  CHECK(net.buses[1].p_load == 100.0);
  CHECK(net.branches[0].x == 0.1);
  CHECK(net.slack() == 0);
  CHECK(net.index_of(2) == 1);
  CHECK(net.index_of(99) == -1);
}

TEST_CASE("bundled cases have the expected sizes") {
  NetworkCase n14 = load_case("cases/ieee14.json");
  CHECK(n14.n_buses() == 14);
  CHECK(n14.n_branches() == 20);
  NetworkCase n24 = load_case("cases/ieee24.json");
  CHECK(n24.n_buses() == 24);
  CHECK(n24.n_branches() == 38);
}

TEST_CASE("emit_case round-trips") {
  NetworkCase net = load_case("cases/ieee14.json");
  NetworkCase again = parse_case(emit_case(net), net.name);
  CHECK(again == net);
}

TEST_CASE("parse_case rejects malformed inputs") {
  auto patched = [](const std::string& from, const std::string& to) {
    std::string text = testutil::two_bus_json();
    text.replace(text.find(from), from.size(), to);
    return text;
  };

  CHECK_THROWS_AS(parse_case("{not json"), MalformedCase);
  CHECK_THROWS_AS(parse_case("[]"), MalformedCase);
  CHECK_THROWS_AS(parse_case(patched("\"kind\": \"Slack\"", "\"kind\": \"PQ\"")), NoSlackBus);
  CHECK_THROWS_AS(parse_case(patched("\"kind\": \"PQ\"", "\"kind\": \"Slack\"")), DuplicateSlack);
  CHECK_THROWS_AS(parse_case(patched("\"x\": 0.1", "\"x\": 0.0")), ZeroImpedanceBranch);
  CHECK_THROWS_AS(parse_case(patched("\"id\": 2", "\"id\": 1")), MalformedCase);
  CHECK_THROWS_AS(parse_case(patched("\"to\": 2", "\"to\": 7")), MalformedCase);
  CHECK_THROWS_AS(parse_case(patched("\"base_mva\": 100.0", "\"base_mva\": -1")), MalformedCase);
}

TEST_CASE("parse_case rejects disconnected graphs") {
  const std::string text = R"({
    "base_mva": 100.0,
    "buses": [
      {"id": 1, "kind": "Slack", "v_mag": 1.0},
      {"id": 2, "kind": "PQ", "v_mag": 1.0},
      {"id": 3, "kind": "PQ", "v_mag": 1.0},
      {"id": 4, "kind": "PQ", "v_mag": 1.0}
    ],
    "branches": [
      {"from": 1, "to": 2, "r": 0.0, "x": 0.1},
      {"from": 3, "to": 4, "r": 0.0, "x": 0.1}
    ]
  })";
  CHECK_THROWS_AS(parse_case(text), DisconnectedGraph);
}

TEST_CASE("ybus of a single reactive branch") {
  NetworkCase net = testutil::two_bus();
  AdmittanceMatrix y = build_ybus(net);
  CHECK(y.b(0, 1) == doctest::Approx(10.0));
  CHECK(y.b(1, 0) == doctest::Approx(10.0));
  CHECK(y.b(0, 0) == doctest::Approx(-10.0));
  CHECK(y.b(1, 1) == doctest::Approx(-10.0));
  for (double g : y.g.a) CHECK(g == 0.0);
}

TEST_CASE("parallel branches add their admittances") {
  std::string text = testutil::two_bus_json();
  const std::string branch = R"({"from": 1, "to": 2, "r": 0.0, "x": 0.1, "b": 0.0})";
  text.replace(text.find(branch), branch.size(), branch + ",\n    " + branch);
  NetworkCase net = parse_case(text);
  REQUIRE(net.n_branches() == 2);
  AdmittanceMatrix y = build_ybus(net);
  CHECK(y.b(0, 1) == doctest::Approx(20.0));
  CHECK(y.b(0, 0) == doctest::Approx(-20.0));
}

TEST_CASE("ybus rows sum to the shunt at tap 1") {
  NetworkCase net = testutil::four_bus();
  AdmittanceMatrix y = build_ybus(net);
  const int n = net.n_buses();
  for (int i = 0; i < n; ++i) {
    double row_g = 0.0, row_b = 0.0, charging = 0.0;
    for (int j = 0; j < n; ++j) {
      row_g += y.g(i, j);
      row_b += y.b(i, j);
    }
    for (const auto& br : net.branches)
      if (br.from == i || br.to == i) charging += br.b / 2.0;
    CHECK(row_g == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(row_b == doctest::Approx(charging).epsilon(1e-10));
  }
}

TEST_CASE("off-nominal tap scales the series terms asymmetrically") {
  std::string text = testutil::two_bus_json();
  const std::string plain = "\"x\": 0.1, \"b\": 0.0";
  text.replace(text.find(plain), plain.size(), "\"x\": 0.1, \"b\": 0.0, \"tap\": 2.0");
  NetworkCase net = parse_case(text);
  AdmittanceMatrix y = build_ybus(net);
  // series y = -j10; from-diagonal gets y/tap^2, off-diagonals y/tap
  CHECK(y.b(0, 0) == doctest::Approx(-10.0 / 4.0));
  CHECK(y.b(0, 1) == doctest::Approx(10.0 / 2.0));
  CHECK(y.b(1, 0) == doctest::Approx(10.0 / 2.0));
  CHECK(y.b(1, 1) == doctest::Approx(-10.0));
}

TEST_CASE("adjacency of a single branch") {
  Matrix a = build_adjacency(testutil::two_bus());
  REQUIRE(a.rows == 2);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 0) == 1.0);
  CHECK(a(1, 1) == 0.0);
}

TEST_CASE("adjacency collapses parallel branches and stays symmetric") {
  NetworkCase net = load_case("cases/ieee14.json");
  Matrix a = build_adjacency(net);
  double ones = 0.0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) {
      CHECK(a(i, j) == a(j, i));
      CHECK((a(i, j) == 0.0 || a(i, j) == 1.0));
      ones += a(i, j);
    }
  CHECK(ones == 40.0);  // 2 per distinct edge
  for (int i = 0; i < a.rows; ++i) CHECK(a(i, i) == 0.0);
}

TEST_CASE("renormalized adjacency hand examples") {
  Matrix pair2(2, 2);
  pair2.a = {0, 1, 1, 0};
  Matrix v2 = renormalize_adjacency(pair2);
  for (double x : v2.a) CHECK(x == doctest::Approx(0.5));

  Matrix lone(1, 1);
  Matrix v1 = renormalize_adjacency(lone);
  CHECK(v1(0, 0) == doctest::Approx(1.0));

  Matrix path(3, 3);
  path.a = {0, 1, 0, 1, 0, 1, 0, 1, 0};
  Matrix v3 = renormalize_adjacency(path);
  CHECK(v3(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(v3(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(v3(1, 0) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(v3(0, 2) == 0.0);
}

TEST_CASE("renormalized adjacency is symmetric with spectrum inside [-1, 1]") {
  NetworkCase net = load_case("cases/ieee24.json");
  Matrix v = renormalize_adjacency(build_adjacency(net));
  const int n = v.rows;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(v(i, j) == doctest::Approx(v(j, i)).epsilon(1e-14));

  // sqrt of the augmented degrees is an exact eigenvector at eigenvalue 1
  Matrix a = build_adjacency(net);
  std::vector<double> d(static_cast<size_t>(n), 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[static_cast<size_t>(i)] += a(i, j);
  std::vector<double> fixed(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) fixed[static_cast<size_t>(i)] = std::sqrt(d[static_cast<size_t>(i)]);
  std::vector<double> vf = linalg::matvec(v, fixed);
  for (int i = 0; i < n; ++i)
    CHECK(vf[static_cast<size_t>(i)] == doctest::Approx(fixed[static_cast<size_t>(i)]).epsilon(1e-12));

  // spectral radius 1: repeated application cannot grow any vector
  Rng rng(5);
  std::vector<double> x(static_cast<size_t>(n));
  for (double& e : x) e = rng.uniform(-1.0, 1.0);
  auto norm2 = [](const std::vector<double>& u) {
    double s = 0.0;
    for (double e : u) s += e * e;
    return std::sqrt(s);
  };
  const double x0 = norm2(x);
  for (int k = 0; k < 50; ++k) x = linalg::matvec(v, x);
  CHECK(norm2(x) <= x0 * (1.0 + 1e-12));
}
