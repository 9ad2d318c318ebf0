#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlleja/multilevel.hpp"

namespace mlleja {

inline constexpr const char* kVersion = "0.1.0";

enum class TestCase { TC1_Sine, TC2_OneSource, TC3_TwoSource };
enum class Method { MH, StdML, MLLejaStd, MLLejaDV, PriorQuad, PosteriorQuad };
enum class QoiKind { PosteriorMean, ExpNegSum };
enum class ForwardSolver { Representer, PCG };

std::string to_string(TestCase t);
std::string to_string(Method m);
std::string to_string(QoiKind q);
std::string to_string(ForwardSolver s);
TestCase test_case_from_string(const std::string& s);
Method method_from_string(const std::string& s);
QoiKind qoi_kind_from_string(const std::string& s);
ForwardSolver forward_solver_from_string(const std::string& s);

struct DataSettings {
  std::vector<double> theta_true;
  double sigma = 0.1;
  std::uint64_t seed = 1;
  int mesh_level = 0;  // ignored by the mesh-free sine model
  bool operator==(const DataSettings&) const = default;
};

struct ModelSettings {
  double alpha = 0.2;
  ForwardSolver solver = ForwardSolver::Representer;
  bool operator==(const ModelSettings&) const = default;
};

struct MHSettings {
  std::size_t n_samples = 200000;
  std::vector<std::vector<double>> proposal_cov;
  std::vector<double> theta0;
  double burn_in = 0.1;
  int mesh_level = 0;
  bool write_chain = true;
  bool operator==(const MHSettings&) const = default;
};

struct QuadSettings {
  double prior_tol = 1e-11;
  double posterior_tol = 1e-5;
  int k_max_prior = 60;
  int k_max_posterior = 8;
  int mesh_level = 0;
  bool operator==(const QuadSettings&) const = default;
};

struct ExperimentConfig {
  TestCase test_case = TestCase::TC1_Sine;
  Method method = Method::PosteriorQuad;
  QoiKind qoi = QoiKind::ExpNegSum;
  DataSettings data;
  ModelSettings model;
  std::vector<LevelSettings> levels;
  int k_max_interp = 20;
  int k_max_quad = 60;
  int k_max_interp_gauss = 15;
  int k_max_quad_gauss = 8;
  MHSettings mh;
  QuadSettings quad;
  std::string output_dir = "runs/out";

  int param_dim() const { return 2; }
  MultilevelConfig multilevel() const;
  // Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Settings of the built-in experiment for a test case (noise seeds chosen so
// that the synthetic data resemble the published reference runs).
ExperimentConfig default_config(TestCase tc, Method m);

// Strict: unknown keys, wrong types and invalid values raise ConfigError with
// the JSON path. Omitted fields take the test case defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& c, const std::filesystem::path& path);

// Git blob hash ("blob <len>\0<bytes>", SHA-1) of the canonical JSON dump.
std::string git_blob_hash(const std::string& bytes);
// Hash of the whole config and of each of its sections.
nlohmann::json config_hashes(const ExperimentConfig& c);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  bool quiet = false;
};

struct RunReport {
  int exit_code = 0;
  nlohmann::json result;
  std::filesystem::path out_dir;
};

// Executes one experiment and writes config.json, data.json, trace.jsonl,
// levels.json and result.json (plus chain.csv for MH) into the output
// directory. Numerical failures are recorded in result.json (exit code 2).
RunReport run_experiment(ExperimentConfig config, const RunOptions& options);

// QoI deltas and cost ratios of two result files (a relative to b).
nlohmann::json compare_results(const nlohmann::json& a, const nlohmann::json& b);
std::string format_comparison(const nlohmann::json& cmp);

// index,node,quad_weight rows for the first `count` Leja nodes.
std::string leja_dump_csv(WeightKind kind, int count);

}  // namespace mlleja
