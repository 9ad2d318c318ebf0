#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "mlleja/orthopoly.hpp"
#include "mlleja/sparse.hpp"

namespace mlleja {

// theta -> observables on a given mesh level (ignored by mesh-free models).
using ForwardModel = std::function<std::vector<double>(std::span<const double>, int)>;

class BayesProblem {
 public:
  BayesProblem(ForwardModel forward, std::vector<double> y, Eigen::MatrixXd noise_cov, std::vector<WeightKind> prior);
  static BayesProblem with_iid_noise(ForwardModel forward, std::vector<double> y, double sigma,
                                     std::vector<WeightKind> prior);

  int dim() const { return static_cast<int>(prior_.size()); }
  int n_obs() const { return static_cast<int>(y_.size()); }
  const std::vector<WeightKind>& prior() const { return prior_; }
  const std::vector<double>& observations() const { return y_; }
  const Eigen::MatrixXd& noise_cov() const { return noise_; }

  std::vector<double> forward(std::span<const double> theta, int mesh_level) const;
  double potential(std::span<const double> theta, int mesh_level) const;
  // 1/2 r^T Gamma^{-1} r for a given prediction.
  double potential_from_prediction(std::span<const double> prediction) const;

  bool in_prior_support(std::span<const double> theta) const;
  double log_prior(std::span<const double> theta) const;

 private:
  ForwardModel forward_;
  std::vector<double> y_;
  Eigen::MatrixXd noise_;
  Eigen::LLT<Eigen::MatrixXd> noise_llt_;
  std::vector<WeightKind> prior_;
};

double likelihood_from_potential(double phi);

struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
// tol times the matrix norm.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-13);

struct GaussianDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd sqrt_cov;
  Eigen::MatrixXd inv_sqrt_cov;
  double log_norm_const = 0.0;  // -1/2 log det(2 pi C)

  int dim() const { return static_cast<int>(mean.size()); }
  double log_density(std::span<const double> theta) const;
  double density(std::span<const double> theta) const { return std::exp(log_density(theta)); }
  std::vector<double> transport(std::span<const double> zeta) const;
  std::vector<double> inverse_transport(std::span<const double> theta) const;
};

GaussianDensity gaussian_from_moments(const Eigen::VectorXd& m, const Eigen::MatrixXd& c);

nlohmann::json to_json(const GaussianDensity& g);
GaussianDensity gaussian_from_json(const nlohmann::json& j);

// Reference coordinates zeta with separable weight; theta = shift + scale zeta.
struct Coordinates {
  std::vector<WeightKind> weights;
  Eigen::VectorXd shift;
  Eigen::MatrixXd scale;
  Eigen::MatrixXd inv_scale;

  static Coordinates identity(std::vector<WeightKind> weights);
  static Coordinates from_gaussian(const GaussianDensity& g);

  int dim() const { return static_cast<int>(weights.size()); }
  std::vector<double> to_theta(std::span<const double> zeta) const;
  std::vector<double> to_reference(std::span<const double> theta) const;
};

// One level of the recursive posterior representation
//   log pi_j = log pi_0 - sum_{levels} (Phi_l(theta) + log Z_l).
struct PosteriorLevel {
  int level = 1;
  std::shared_ptr<const PosteriorLevel> parent;
  std::shared_ptr<const SparseSurrogate> phi;  // surrogate in `coords`
  Coordinates coords;
  double evidence = 1.0;  // Z at level 1, Z_delta at later levels
  std::vector<WeightKind> prior;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::shared_ptr<const GaussianDensity> gauss;  // Gaussian approximation of this level

  double log_density(std::span<const double> theta) const;
  // exp(-surrogate potential) of this level only.
  double level_likelihood(std::span<const double> theta) const;
  // True if every surrogate in the chain is identically zero, so the
  // posterior equals the separable prior.
  bool separable() const;
};

double posterior_density(const PosteriorLevel& level, std::span<const double> theta);

inline constexpr double kBiasRatioCap = 1e12;

// R = pi_level / N(mean, cov); 0 outside the prior support, capped above.
std::function<double(std::span<const double>)> bias_ratio(std::shared_ptr<const PosteriorLevel> level);
std::size_t bias_ratio_cap_events();

}  // namespace mlleja
