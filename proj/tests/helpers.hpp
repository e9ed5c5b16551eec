#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "pflab/network.hpp"

namespace testutil {

// Slack feeding a 100 MW load over a lossless j0.1 line. The closed form
// comes from u^2 - u + 0.01 = 0 with u = V2^2 (high root).
inline std::string two_bus_json() {
  return R"({
  "base_mva": 100.0,
  "buses": [
    {"id": 1, "kind": "Slack", "v_mag": 1.0, "p_load": 0.0, "q_load": 0.0},
    {"id": 2, "kind": "PQ", "v_mag": 1.0, "p_load": 100.0, "q_load": 0.0}
  ],
  "branches": [
    {"from": 1, "to": 2, "r": 0.0, "x": 0.1, "b": 0.0}
  ]
})";
}

inline pflab::NetworkCase two_bus() { return pflab::parse_case(two_bus_json(), "twobus"); }

// Small meshed case with generation on two buses and load on three, lossy
// lines and some charging. Converges in a handful of iterations and stays
// convergent across +-15% load scaling, so dataset tests can use it.
inline std::string four_bus_json() {
  return R"({
  "base_mva": 100.0,
  "buses": [
    {"id": 1, "kind": "Slack", "v_mag": 1.02, "p_load": 0.0, "q_load": 0.0},
    {"id": 2, "kind": "PV", "v_mag": 1.01, "p_load": 40.0, "q_load": 10.0},
    {"id": 3, "kind": "PQ", "v_mag": 1.0, "p_load": 60.0, "q_load": 15.0},
    {"id": 4, "kind": "PQ", "v_mag": 1.0, "p_load": 30.0, "q_load": 5.0}
  ],
  "branches": [
    {"from": 1, "to": 2, "r": 0.01, "x": 0.06, "b": 0.02},
    {"from": 1, "to": 3, "r": 0.02, "x": 0.12, "b": 0.02},
    {"from": 2, "to": 3, "r": 0.02, "x": 0.10, "b": 0.02},
    {"from": 2, "to": 4, "r": 0.015, "x": 0.08, "b": 0.02},
    {"from": 3, "to": 4, "r": 0.025, "x": 0.14, "b": 0.02}
  ],
  "generators": [
    {"bus": 1, "p_set": 0.0, "v_set": 1.02},
    {"bus": 2, "p_set": 70.0, "v_set": 1.01}
  ]
})";
}

inline pflab::NetworkCase four_bus() { return pflab::parse_case(four_bus_json(), "fourbus"); }

// Fresh empty directory under the build tree for artifact tests.
inline std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path("build") / "test_tmp" / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
