#pragma once

#include <span>
#include <string>
#include <vector>

namespace mlleja {

enum class WeightKind { UniformUnit, StandardNormal };

struct Interval {
  double lower;
  double upper;
};

// Nominal support used for node placement. The normal weight is truncated
// to [-4, 4] there; its orthonormal basis is taken w.r.t. the full line.
Interval support(WeightKind kind);
double density(WeightKind kind, double theta);
double log_density(WeightKind kind, double theta);
bool in_support(WeightKind kind, double theta);

std::string to_string(WeightKind kind);
WeightKind weight_kind_from_string(const std::string& name);

// Orthonormal polynomials psi_0..psi_max_degree for one weight density.
class OrthoBasis1D {
 public:
  OrthoBasis1D(WeightKind kind, int max_degree);

  WeightKind kind() const { return kind_; }
  int max_degree() const { return max_degree_; }

  double eval(int degree, double theta) const;
  // out[p] = psi_p(theta) for p < out.size(); out.size() <= max_degree + 1.
  void eval_all(double theta, std::span<double> out) const;
  // Values and first derivatives up to degree out.size() - 1.
  void eval_all_with_derivative(double theta, std::span<double> value,
                                std::span<double> deriv) const;

 private:
  WeightKind kind_;
  int max_degree_;
};

double eval_basis(const OrthoBasis1D& basis, int degree, double theta);

double eval_basis_product(std::span<const OrthoBasis1D> bases,
                          std::span<const int> multidegree,
                          std::span<const double> theta);

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss rule for the weight (Legendre mapped to [0,1], or
// probabilists' Hermite); weights sum to one.
GaussRule gauss_rule(WeightKind kind, int n);

}  // namespace mlleja
