#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pflab/commands.hpp"
#include "pflab/errors.hpp"
#include "pflab/provenance.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string case_path;
  std::string out_dir;
  int n_samples = 0;
  uint64_t seed = 0;
};

void add_common(CLI::App* sub, Flags& flags) {
  sub->add_option("-c,--config", flags.config_path, "JSON config file");
  sub->add_option("--case", flags.case_path, "grid case file (overrides config)");
  sub->add_option("--out", flags.out_dir, "output directory (overrides config)");
  sub->add_option("--samples", flags.n_samples, "dataset size (overrides config)");
  sub->add_option("--seed", flags.seed, "run seed (overrides config and PFLAB_SEED)");
}

// Precedence: flags beat the config file, which beats PFLAB_SEED, which
// beats built-in defaults.
pflab::RunConfig resolve(const CLI::App* sub, const Flags& flags,
                         const std::string& positional_case = "") {
  pflab::RunConfig config = pflab::default_run_config();
  bool seed_given = sub->count("--seed") > 0;
  if (!flags.config_path.empty()) {
    const std::string text = pflab::read_file(flags.config_path);
    config = pflab::run_config_from_json(text, config);
    if (!seed_given) {
      try {
        seed_given = nlohmann::json::parse(text).contains("seed");
      } catch (...) {
      }
    }
  }
  if (!seed_given) {
    if (const char* env = std::getenv("PFLAB_SEED"); env && *env) {
      const std::string text(env);
      if (text.find_first_not_of("0123456789") != std::string::npos)
        throw pflab::IoError("PFLAB_SEED is not an unsigned integer: '" + text + "'");
      config.seed = std::strtoull(text.c_str(), nullptr, 10);
    }
  }
  if (sub->count("--case")) config.case_path = flags.case_path;
  if (!positional_case.empty()) config.case_path = positional_case;
  if (sub->count("--out")) config.out_dir = flags.out_dir;
  if (sub->count("--samples")) config.n_samples = flags.n_samples;
  if (sub->count("--seed")) config.seed = flags.seed;
  if (config.case_path.empty())
    throw pflab::IoError("no case file given (pass --case or set \"case\" in the config)");
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("pflab ") + pflab::kVersion +
               " - power flow solvers, dataset generation, and surrogate models"};
  app.require_subcommand(1);

  Flags flags;
  std::string method = "acpf";
  std::string json_out;
  std::string model_arg;
  std::string solve_case;

  auto* solve = app.add_subcommand("solve", "run one power flow and print the solution");
  solve->add_option("case_file", solve_case, "grid case file");
  solve->add_option("--method", method, "acpf (Newton-Raphson) or dcpf (linearized)")
      ->check(CLI::IsMember({"acpf", "dcpf"}));
  solve->add_option("--json", json_out, "also write the solution as JSON to this path");
  add_common(solve, flags);

  auto* generate = app.add_subcommand("generate", "perturb and solve to build a labeled dataset");
  add_common(generate, flags);

  auto* train = app.add_subcommand("train", "fit one surrogate and write its checkpoint");
  train->add_option("--model", model_arg, "model kind")
      ->required()
      ->check(CLI::IsMember({"gnn", "dnn", "cnn"}));
  add_common(train, flags);

  auto* evaluate = app.add_subcommand("evaluate", "score a model or solver on the validation split");
  evaluate->add_option("--model", model_arg, "kind name, checkpoint path, dcpf, or acpf")
      ->required();
  add_common(evaluate, flags);

  auto* compare = app.add_subcommand("compare", "evaluate every configured source side by side");
  add_common(compare, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  return pflab::run_command(
      [&]() -> int {
        if (solve->parsed())
          return pflab::cmd_solve(resolve(solve, flags, solve_case), method, json_out, std::cout,
                                  std::cerr);
        if (generate->parsed()) return pflab::cmd_generate(resolve(generate, flags), std::cout, std::cerr);
        if (train->parsed())
          return pflab::cmd_train(resolve(train, flags), model_arg, std::cout, std::cerr);
        if (evaluate->parsed())
          return pflab::cmd_evaluate(resolve(evaluate, flags), model_arg, std::cout, std::cerr);
        if (compare->parsed()) return pflab::cmd_compare(resolve(compare, flags), std::cout, std::cerr);
        return 1;
      },
      std::cerr);
}
