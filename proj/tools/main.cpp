#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "mlleja/error.hpp"
#include "mlleja/experiment.hpp"

namespace {

nlohmann::json read_result(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mlleja::ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw mlleja::ConfigError(path + ": malformed JSON: " + e.what());
  }
}

void print_result(const mlleja::RunReport& r) {
  const auto& j = r.result;
  std::cout << j.value("method", "?") << " on " << j.value("test_case", "?") << ": " << j.value("status", "?") << "\n";
  if (j.contains("qoi")) std::cout << "  qoi " << j["qoi"].dump() << "\n";
  if (j.contains("qoi_std_error")) std::cout << "  std error " << j["qoi_std_error"].dump() << "\n";
  if (j.contains("acceptance_rate")) std::cout << "  acceptance " << j["acceptance_rate"].get<double>() << "\n";
  if (j.contains("quad_nodes")) std::cout << "  quadrature nodes " << j["quad_nodes"].get<std::size_t>() << "\n";
  if (j.contains("ledger"))
    for (const auto& l : j["ledger"]["levels"])
      std::cout << "  level " << l["level"].get<int>() << " mesh " << l["mesh"].get<int>() << ": interp "
                << l["interp_evals"].get<std::size_t>() << ", quad " << l["quad_evals"].get<std::size_t>() << "\n";
  if (j.contains("error")) std::cout << "  error: " << j["error"].get<std::string>() << "\n";
  std::cout << "  forward evaluations " << j["forward_evaluations"].dump() << "\n";
  std::cout << "  wall time " << j["wall_time_s"].get<double>() << " s\n";
  std::cout << "  output " << r.out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel adaptive sparse Leja Bayesian inversion"};
  app.require_subcommand(1);

  std::string run_config, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool resume = false;
  auto* run = app.add_subcommand("run", "Run an experiment and write its result files");
  run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* threads_opt = run->add_option("--threads", threads, "Evaluation threads")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "Noise seed (overrides the config)");
  run->add_flag("--resume", resume, "Reuse data.json from the output directory");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string cmp_a, cmp_b;
  bool cmp_json = false;
  auto* compare = app.add_subcommand("compare", "QoI deltas and cost ratios of two result files");
  compare->add_option("result_a", cmp_a, "result.json of run A")->required()->check(CLI::ExistingFile);
  compare->add_option("result_b", cmp_b, "result.json of run B")->required()->check(CLI::ExistingFile);
  compare->add_flag("--json", cmp_json, "Print the comparison as JSON");

  std::string weight = "uniform";
  int count = 10;
  auto* dump = app.add_subcommand("leja-dump", "Print Leja nodes and quadrature weights as CSV");
  dump->add_option("--weight", weight, "uniform or normal")->check(CLI::IsMember({"uniform", "normal"}));
  dump->add_option("--count", count, "Number of nodes")->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*run) {
      mlleja::RunOptions opts;
      if (*out_opt) opts.out_dir = out_dir;
      if (*threads_opt) opts.threads = threads;
      if (*seed_opt) opts.seed = seed;
      opts.resume = resume;
      const auto report = mlleja::run_experiment(mlleja::load_config(run_config), opts);
      print_result(report);
      return report.exit_code;
    }
    if (*validate) {
      const auto cfg = mlleja::load_config(validate_config);
      std::cout << "ok: " << mlleja::to_string(cfg.test_case) << " " << mlleja::to_string(cfg.method) << " (config "
                << mlleja::config_hashes(cfg)["config"].get<std::string>() << ")\n";
      return 0;
    }
    if (*compare) {
      const auto cmp = mlleja::compare_results(read_result(cmp_a), read_result(cmp_b));
      std::cout << (cmp_json ? cmp.dump(2) + "\n" : mlleja::format_comparison(cmp));
      return 0;
    }
    if (*dump) {
      std::cout << mlleja::leja_dump_csv(mlleja::weight_kind_from_string(weight), count);
      return 0;
    }
  } catch (const mlleja::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const mlleja::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const mlleja::ModelEvaluationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
