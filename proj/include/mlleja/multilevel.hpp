#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlleja/adaptive.hpp"
#include "mlleja/bayes.hpp"

namespace mlleja {

enum class Variant { StdML, MLLejaStd, MLLejaDV };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct LevelSettings {
  int mesh_level = 0;
  double tol_in = 1e-4;
  std::vector<double> tau_in;  // directional tolerances (squared), MLLejaDV only
  double tol_qu = 1e-10;
  bool operator==(const LevelSettings&) const = default;
};

struct MultilevelConfig {
  std::vector<LevelSettings> levels;  // ordered coarse to fine
  // Level caps for prior (uniform) coordinates and for the transported
  // standard-normal coordinates, whose truncated Leja rules lose stability
  // at high degree.
  int k_max_interp = 20;
  int k_max_quad = 60;
  int k_max_interp_gauss = 15;
  int k_max_quad_gauss = 8;
  Variant variant = Variant::MLLejaStd;

  int J() const { return static_cast<int>(levels.size()); }
  int interp_cap(const std::vector<WeightKind>& weights) const;
  int quad_cap(const std::vector<WeightKind>& weights) const;
  void validate(int dim) const;
};

struct LevelCost {
  int level = 0;
  int mesh_level = 0;
  std::size_t interp_nodes = 0;
  std::map<int, std::size_t> forward_by_mesh;
  std::size_t interp_out_of_support = 0;
  std::size_t quad_evals = 0;    // unique surrogate evaluations across the level's integrals
  std::size_t quad_skipped = 0;  // quadrature nodes outside the prior support
  double evidence = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double tol_in = 0.0;
  double tol_qu = 0.0;
  std::string interp_stop;
  double wall_time_s = 0.0;
};

struct CostLedger {
  std::vector<LevelCost> levels;
  std::size_t final_quad_evals = 0;
  std::map<int, std::size_t> forward_by_mesh() const;
};

nlohmann::json to_json(const LevelCost& c);
nlohmann::json to_json(const CostLedger& c);

using Qoi = std::function<std::vector<double>(std::span<const double>)>;
// Receives trace records (one JSON object per adaptive step, tagged by phase).
using TraceSink = std::function<void(const nlohmann::json&)>;

struct LevelOutcome {
  std::shared_ptr<const PosteriorLevel> posterior;
  LevelCost cost;
};

LevelOutcome level1(const BayesProblem& problem, const MultilevelConfig& config, const TraceSink& trace = {});
LevelOutcome level_update(std::shared_ptr<const PosteriorLevel> parent, const BayesProblem& problem,
                          const MultilevelConfig& config, int j, const TraceSink& trace = {});

struct MultilevelResult {
  std::shared_ptr<const PosteriorLevel> posterior;
  std::vector<double> qoi;
  CostLedger ledger;
};

MultilevelResult run_multilevel(const BayesProblem& problem, const MultilevelConfig& config, const Qoi& qoi,
                                int qoi_dim, const TraceSink& trace = {});

struct StdMLResult {
  std::vector<double> qoi;
  std::vector<std::vector<double>> per_level;  // I_j
  CostLedger ledger;
};

StdMLResult run_stdml(const BayesProblem& problem, const MultilevelConfig& config, const Qoi& qoi, int qoi_dim,
                      const TraceSink& trace = {});

// Family of integrals of f_q(theta) * base(theta) against the reference
// weight of `coords`, one adaptive quadrature per f_q; base is evaluated once
// per distinct node and is taken as 0 outside `support`.
struct IntegralFamily {
  std::vector<double> values;
  std::size_t unique_evals = 0;
  std::size_t skipped = 0;
  std::vector<std::string> stop_reasons;
};

IntegralFamily integrate_family(const Coordinates& coords, const std::function<double(std::span<const double>)>& base,
                                const std::function<bool(std::span<const double>)>& support,
                                const std::vector<std::function<double(std::span<const double>)>>& factors,
                                double tol, int k_max, const TraceSink& trace = {}, const std::string& phase = "quad");

// Posterior mean and covariance integrals (factors 1, theta_i, theta_i theta_k).
struct Moments {
  double evidence = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t unique_evals = 0;
  std::size_t skipped = 0;
};
Moments posterior_moments(const Coordinates& coords, const std::function<double(std::span<const double>)>& base,
                          const std::function<bool(std::span<const double>)>& support, double tol, int k_max,
                          const TraceSink& trace = {}, const std::string& phase = "moments");

// Single-level quadrature with the full forward model (no surrogate).
struct DirectQuadResult {
  std::vector<double> qoi;
  double evidence = 0.0;
  std::size_t nodes = 0;        // forward evaluations in the reported stage
  std::size_t setup_nodes = 0;  // forward evaluations spent on the Gaussian fit
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Prior-weighted importance identity: E[g] = int g L dpi_0 / int L dpi_0.
DirectQuadResult prior_weighted_quadrature(const BayesProblem& problem, int mesh_level, const Qoi& qoi, int qoi_dim,
                                           double tol, int k_max, const TraceSink& trace = {});
// Fit N(m, C) by prior-weighted quadrature, then integrate g pi / N(m, C)
// against the Gaussian in transported coordinates.
DirectQuadResult posterior_weighted_quadrature(const BayesProblem& problem, int mesh_level, const Qoi& qoi,
                                               int qoi_dim, double setup_tol, double tol, int setup_k_max, int k_max,
                                               const TraceSink& trace = {});

}  // namespace mlleja
