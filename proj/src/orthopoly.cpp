#include "mlleja/orthopoly.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mlleja/error.hpp"

namespace mlleja {

namespace {

// Orthonormal three-term recurrence in the form
//   x psi_n = b_{n+1} psi_{n+1} + a_n psi_n + b_n psi_{n-1}
// written in the variable x: x = 2 theta - 1 for Legendre, x = theta for Hermite.
double recurrence_b(WeightKind kind, int n) {
  if (kind == WeightKind::UniformUnit) {
    const double nn = static_cast<double>(n);
    return nn / std::sqrt(4.0 * nn * nn - 1.0);
  }
  return std::sqrt(static_cast<double>(n));
}

double to_recurrence_variable(WeightKind kind, double theta) {
  return kind == WeightKind::UniformUnit ? 2.0 * theta - 1.0 : theta;
}

double psi0_slope(WeightKind kind) {
  // d/dtheta of x
  return kind == WeightKind::UniformUnit ? 2.0 : 1.0;
}

}  // namespace

Interval support(WeightKind kind) {
  return kind == WeightKind::UniformUnit ? Interval{0.0, 1.0} : Interval{-4.0, 4.0};
}

double density(WeightKind kind, double theta) {
  if (kind == WeightKind::UniformUnit) return (theta >= 0.0 && theta <= 1.0) ? 1.0 : 0.0;
  return std::exp(-0.5 * theta * theta) / std::sqrt(2.0 * std::numbers::pi);
}

double log_density(WeightKind kind, double theta) {
  if (kind == WeightKind::UniformUnit)
    return (theta >= 0.0 && theta <= 1.0) ? 0.0 : -INFINITY;
  return -0.5 * theta * theta - 0.5 * std::log(2.0 * std::numbers::pi);
}

bool in_support(WeightKind kind, double theta) {
  if (kind == WeightKind::UniformUnit) return theta >= 0.0 && theta <= 1.0;
  return std::isfinite(theta);
}

std::string to_string(WeightKind kind) {
  return kind == WeightKind::UniformUnit ? "uniform" : "normal";
}

WeightKind weight_kind_from_string(const std::string& name) {
  if (name == "uniform") return WeightKind::UniformUnit;
  if (name == "normal") return WeightKind::StandardNormal;
  throw std::domain_error("unknown weight kind '" + name + "'");
}

OrthoBasis1D::OrthoBasis1D(WeightKind kind, int max_degree)
    : kind_(kind), max_degree_(max_degree) {
  if (max_degree < 0) throw std::domain_error("max_degree must be nonnegative");
}

void OrthoBasis1D::eval_all(double theta, std::span<double> out) const {
  const int n = static_cast<int>(out.size());
  if (n == 0) return;
  if (n - 1 > max_degree_) throw std::domain_error("degree exceeds basis max_degree");
  const double x = to_recurrence_variable(kind_, theta);
  out[0] = 1.0;
  if (n == 1) return;
  out[1] = x / recurrence_b(kind_, 1);
  for (int p = 1; p + 1 < n; ++p)
    out[p + 1] = (x * out[p] - recurrence_b(kind_, p) * out[p - 1]) / recurrence_b(kind_, p + 1);
}

void OrthoBasis1D::eval_all_with_derivative(double theta, std::span<double> value,
                                            std::span<double> deriv) const {
  const int n = static_cast<int>(value.size());
  if (deriv.size() != value.size()) throw std::domain_error("value/derivative size mismatch");
  if (n == 0) return;
  if (n - 1 > max_degree_) throw std::domain_error("degree exceeds basis max_degree");
  const double x = to_recurrence_variable(kind_, theta);
  const double dx = psi0_slope(kind_);
  value[0] = 1.0;
  deriv[0] = 0.0;
  if (n == 1) return;
  const double b1 = recurrence_b(kind_, 1);
  value[1] = x / b1;
  deriv[1] = dx / b1;
  for (int p = 1; p + 1 < n; ++p) {
    const double bp = recurrence_b(kind_, p);
    const double bq = recurrence_b(kind_, p + 1);
    value[p + 1] = (x * value[p] - bp * value[p - 1]) / bq;
    deriv[p + 1] = (dx * value[p] + x * deriv[p] - bp * deriv[p - 1]) / bq;
  }
}

double OrthoBasis1D::eval(int degree, double theta) const {
  if (degree < 0 || degree > max_degree_) throw std::domain_error("degree out of range");
  if (degree == 0) return 1.0;
  const double x = to_recurrence_variable(kind_, theta);
  double prev = 1.0;
  double cur = x / recurrence_b(kind_, 1);
  for (int p = 1; p < degree; ++p) {
    const double next = (x * cur - recurrence_b(kind_, p) * prev) / recurrence_b(kind_, p + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

double eval_basis(const OrthoBasis1D& basis, int degree, double theta) {
  return basis.eval(degree, theta);
}

double eval_basis_product(std::span<const OrthoBasis1D> bases, std::span<const int> multidegree,
                          std::span<const double> theta) {
  if (bases.size() != multidegree.size() || bases.size() != theta.size())
    throw std::domain_error("dimension mismatch in eval_basis_product");
  double prod = 1.0;
  for (std::size_t i = 0; i < bases.size(); ++i) prod *= bases[i].eval(multidegree[i], theta[i]);
  return prod;
}

GaussRule gauss_rule(WeightKind kind, int n) {
  if (n < 1) throw std::domain_error("gauss rule needs at least one node");
  const OrthoBasis1D basis(kind, n);
  std::vector<double> value(n + 1), deriv(n + 1);
  auto psi_n = [&](double t) {
    basis.eval_all(t, value);
    return value[n];
  };

  // All roots lie inside this interval; bracket them by sign changes on a
  // grid that is refined until exactly n brackets are found.
  const double lo = kind == WeightKind::UniformUnit ? 0.0 : -std::sqrt(4.0 * n + 2.0);
  const double hi = kind == WeightKind::UniformUnit ? 1.0 : std::sqrt(4.0 * n + 2.0);
  std::vector<std::pair<double, double>> brackets;
  for (int cells = 64 * n; brackets.size() != static_cast<std::size_t>(n); cells *= 4) {
    if (cells > (1 << 26)) throw NumericalError("could not bracket gauss rule roots");
    brackets.clear();
    double a = lo, fa = psi_n(a);
    for (int c = 1; c <= cells; ++c) {
      const double b = lo + (hi - lo) * c / cells;
      const double fb = psi_n(b);
      if (fb == 0.0 || (fa < 0.0) != (fb < 0.0)) brackets.emplace_back(a, b);
      if (fb == 0.0) {
        // exact root on a grid point: step past it
        a = b;
        fa = psi_n(b + 1e-3 * (hi - lo) / cells);
        continue;
      }
      a = b;
      fa = fb;
    }
  }

  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double a = brackets[i].first, b = brackets[i].second;
    double fa = psi_n(a);
    double t = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      basis.eval_all_with_derivative(t, value, deriv);
      const double f = value[n];
      if (f == 0.0) break;
      if ((f < 0.0) == (fa < 0.0)) {
        a = t;
        fa = f;
      } else {
        b = t;
      }
      double next = t - f / deriv[n];
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      const bool done = std::abs(next - t) <= 1e-16 * std::max(1.0, std::abs(t)) || b - a <= 1e-16;
      t = next;
      if (done) break;
    }
    basis.eval_all(t, std::span<double>(value.data(), n));
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += value[k] * value[k];
    rule.nodes[i] = t;
    rule.weights[i] = 1.0 / s;
  }
  return rule;
}

}  // namespace mlleja
