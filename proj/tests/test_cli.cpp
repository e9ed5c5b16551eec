#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "pflab/provenance.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string pflab_bin() {
  const char* env = std::getenv("PFLAB_BIN");
  return env && *env ? env : "build/pflab";
}

// Runs the binary through the shell with stdout/stderr captured to files.
// `env_prefix` may carry VAR=value assignments (or an explicit unset).
RunResult run_cli(const std::string& args, const std::string& env_prefix = "env -u PFLAB_SEED") {
  const std::string dir = testutil::temp_dir("cli_io");
  const std::string out_path = dir + "/out", err_path = dir + "/err";
  const std::string cmd =
      env_prefix + " " + pflab_bin() + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = pflab::read_file(out_path);
  r.err = pflab::read_file(err_path);
  return r;
}

std::string write_config(const std::string& tag, const std::string& text) {
  const std::string dir = testutil::temp_dir("cli_cfg_" + tag);
  const std::string path = dir + "/config.json";
  pflab::write_file_atomic(path, text);
  return path;
}

}  // namespace

TEST_CASE("solve exits 0 and prints the solution") {
  RunResult r = run_cli("solve cases/ieee14.json");
  CHECK(r.code == 0);
  CHECK(r.out.find("converged") != std::string::npos);
  CHECK(r.out.find("1.06000") != std::string::npos);
  CHECK(r.err.empty());

  RunResult dc = run_cli("solve cases/ieee14.json --method dcpf");
  CHECK(dc.code == 0);
}

TEST_CASE("missing files and bad flags exit 1") {
  RunResult missing = run_cli("solve cases/nonexistent.json");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("IoError") != std::string::npos);

  RunResult bad_method = run_cli("solve cases/ieee14.json --method homotopy");
  CHECK(bad_method.code == 1);

  RunResult no_sub = run_cli("");
  CHECK(no_sub.code == 1);

  RunResult no_case = run_cli("generate --samples 10");
  CHECK(no_case.code == 1);
}

TEST_CASE("malformed cases exit 3") {
  const std::string dir = testutil::temp_dir("cli_badcase");
  pflab::write_file_atomic(dir + "/bad.json", "{\"base_mva\": 100.0, \"buses\": [], \"branches\": []}");
  RunResult r = run_cli("solve " + dir + "/bad.json");
  CHECK(r.code == 3);
  CHECK(r.err.find("MalformedCase") != std::string::npos);
}

TEST_CASE("numerical failure exits 2") {
  std::string text = testutil::two_bus_json();
  const std::string load = "\"p_load\": 100.0";
  text.replace(text.find(load), load.size(), "\"p_load\": 2000.0");
  const std::string dir = testutil::temp_dir("cli_divergent");
  pflab::write_file_atomic(dir + "/heavy.json", text);
  RunResult r = run_cli("generate --case " + dir + "/heavy.json --samples 10 --out " + dir);
  CHECK(r.code == 2);
}

TEST_CASE("seed precedence: flag beats config beats environment") {
  const std::string dir = testutil::temp_dir("cli_seed");
  const std::string case_dir = testutil::temp_dir("cli_seed_case");
  pflab::write_file_atomic(case_dir + "/mesh.json", testutil::four_bus_json());
  const std::string case_arg = "generate --case " + case_dir + "/mesh.json";

  auto seed_of = [&](const std::string& args, const std::string& env) {
    fs::remove(dir + "/mesh.pfds");
    RunResult r = run_cli(args + " --samples 8 --out " + dir, env);
    REQUIRE(r.code == 0);
    // line 1 of the dataset carries the effective run seed
    const std::string text = pflab::read_file(dir + "/mesh.pfds");
    const auto pos = text.find("\"seed\":");
    REQUIRE(pos != std::string::npos);
    const auto start = pos + 7;
    return text.substr(start, text.find_first_of(",}", start) - start);
  };

  CHECK(seed_of(case_arg, "env -u PFLAB_SEED") == "1");             // built-in default
  CHECK(seed_of(case_arg, "env PFLAB_SEED=7") == "7");              // env fallback
  CHECK(seed_of(case_arg + " --seed 3", "env PFLAB_SEED=7") == "3");  // flag wins

  const std::string cfg = write_config("seed", "{\"seed\": 5}");
  CHECK(seed_of(case_arg + " -c " + cfg, "env PFLAB_SEED=7") == "5");  // config beats env
  CHECK(seed_of(case_arg + " -c " + cfg + " --seed 3", "env PFLAB_SEED=7") == "3");

  RunResult junk = run_cli(case_arg + " --samples 8 --out " + dir, "env PFLAB_SEED=abc");
  CHECK(junk.code == 1);
  CHECK(junk.err.find("PFLAB_SEED") != std::string::npos);
}

TEST_CASE("config file drives compare and flags override it") {
  const std::string out_dir = testutil::temp_dir("cli_compare");
  const std::string cfg = write_config("compare", R"({
    "case": "cases/ieee14.json",
    "out_dir": ")" + out_dir + R"(",
    "n_samples": 40,
    "seed": 42,
    "models": {
      "gnn": {"epochs": 6, "embed_dim": 8, "hidden_sizes": [16, 8]}
    },
    "compare": ["dcpf"]
  })");

  RunResult r = run_cli("compare -c " + cfg);
  CHECK(r.code == 0);
  CHECK(r.out.find("dcpf") != std::string::npos);
  CHECK(fs::exists(out_dir + "/ieee14.compare.txt"));

  // --samples overrides the file; the dataset is regenerated, not reused
  RunResult r2 = run_cli("compare -c " + cfg + " --samples 45");
  CHECK(r2.code == 0);
  CHECK(r2.out.find("wrote") != std::string::npos);
}

TEST_CASE("solve --json writes a machine-readable artifact") {
  const std::string dir = testutil::temp_dir("cli_json");
  RunResult r = run_cli("solve cases/ieee14.json --json " + dir + "/sol.json");
  CHECK(r.code == 0);
  const std::string text = pflab::read_file(dir + "/sol.json");
  CHECK(text.find("\"converged\": true") != std::string::npos);
}
