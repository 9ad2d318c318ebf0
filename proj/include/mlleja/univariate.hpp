#pragma once

#include <span>
#include <vector>

#include "mlleja/orthopoly.hpp"

namespace mlleja {

enum class Growth { Interp, Quad };

// Number of nodes at level k (N_0 = 0). Interp adds one node per level;
// Quad uses N_1 = 1, N_k = 2k - 1.
int level_size(Growth growth, int level);

// First `count` weighted Leja nodes for the given density. Sequences are
// generated once per density and cached process-wide (thread-safe).
std::vector<double> leja_nodes(WeightKind kind, int count);

// Value of log w(theta) + sum_m log|theta - nodes[m]|, the Leja objective.
double leja_log_objective(WeightKind kind, std::span<const double> nodes, double theta);

// Quadrature weights exact for polynomials of degree < nodes.size(),
// from the moment conditions sum_j psi_p(theta_j) w_j = delta_{p0}.
std::vector<double> compute_quad_weights(std::span<const double> nodes, const OrthoBasis1D& basis);

// Barycentric weights 1 / prod_{m != j} (theta_j - theta_m).
std::vector<double> barycentric_weights(std::span<const double> nodes);

class LejaRule1D {
 public:
  LejaRule1D(WeightKind kind, Growth growth, int initial_count = 1);

  WeightKind kind() const { return kind_; }
  Growth growth() const { return growth_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int count(int level) const { return level_size(growth_, level); }
  // Largest level whose node count is available.
  int max_level() const;

  std::span<const double> nodes() const { return nodes_; }
  double node(int ordinal) const { return nodes_.at(ordinal); }

  // Appends nodes until size() >= target_count; existing nodes are unchanged.
  void extend_to(int target_count);
  void extend_to_level(int level) { extend_to(count(level)); }

  // Barycentric weights of the first n nodes.
  std::span<const double> bary_weights(int n) const;
  // Quadrature weights of the first n nodes.
  std::span<const double> quad_weights_for_count(int n) const;
  std::span<const double> quad_weights(int level) const { return quad_weights_for_count(count(level)); }

  // Lagrange basis of the first n nodes at theta.
  void lagrange_basis(int n, double theta, std::span<double> out) const;
  double interpolate(int level, std::span<const double> values, double theta) const;
  double integrate(int level, std::span<const double> values) const;

 private:
  WeightKind kind_;
  Growth growth_;
  std::vector<double> nodes_;
  std::vector<std::vector<double>> bary_;  // bary_[n-1]: weights for first n nodes
  std::vector<std::vector<double>> quad_;  // quad_[n-1]
};

LejaRule1D extend_leja(LejaRule1D rule, int target_count);
double interpolate_1d(const LejaRule1D& rule, int level, std::span<const double> values, double theta);
std::vector<double> quad_weights(const LejaRule1D& rule, int level, const OrthoBasis1D& basis);
double integrate_1d(const LejaRule1D& rule, int level, std::span<const double> values);

}  // namespace mlleja
