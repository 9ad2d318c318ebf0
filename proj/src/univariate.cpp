#include "mlleja/univariate.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "mlleja/error.hpp"

namespace mlleja {

int level_size(Growth growth, int level) {
  if (level < 0) throw std::domain_error("negative level");
  if (level == 0) return 0;
  return growth == Growth::Interp ? level : 2 * level - 1;
}

double leja_log_objective(WeightKind kind, std::span<const double> nodes, double theta) {
  double v = log_density(kind, theta);
  for (double t : nodes) v += std::log(std::abs(theta - t));
  return v;
}

namespace {

constexpr int kCandidates = 100001;

class LejaGenerator {
 public:
  explicit LejaGenerator(WeightKind kind) : kind_(kind) {
    const Interval s = support(kind);
    grid_.resize(kCandidates);
    logprod_.assign(kCandidates, 0.0);
    for (int i = 0; i < kCandidates; ++i) {
      grid_[i] = s.lower + (s.upper - s.lower) * static_cast<double>(i) / (kCandidates - 1);
      logprod_[i] = log_density(kind, grid_[i]);
    }
  }

  std::vector<double> first(int count) {
    std::lock_guard lock(mutex_);
    while (static_cast<int>(nodes_.size()) < count) append_next();
    return {nodes_.begin(), nodes_.begin() + count};
  }

 private:
  double objective(double theta) const { return leja_log_objective(kind_, nodes_, theta); }

  double golden(double a, double b) const {
    constexpr double r = 0.6180339887498949;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > 1e-13) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = objective(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = objective(d);
      }
    }
    return 0.5 * (a + b);
  }

  double select() const {
    if (nodes_.empty()) return kind_ == WeightKind::UniformUnit ? 0.5 : 0.0;
    double best = -INFINITY;
    for (double v : logprod_) best = std::max(best, v);
    const double window = 1e-3;
    double chosen_theta = 0.0;
    double chosen_val = -INFINITY;
    auto consider = [&](double theta, double val) {
      if (!std::isfinite(val)) return;
      const double tol = 1e-12 * std::max(1.0, std::abs(val));
      if (val > chosen_val + tol || (std::abs(val - chosen_val) <= tol && theta < chosen_theta)) {
        chosen_val = val;
        chosen_theta = theta;
      }
    };
    const int n = kCandidates;
    for (int i = 0; i < n; ++i) {
      const double v = logprod_[i];
      if (!(v >= best - window)) continue;
      const bool left_ok = i == 0 || v >= logprod_[i - 1];
      const bool right_ok = i == n - 1 || v >= logprod_[i + 1];
      if (!left_ok || !right_ok) continue;
      consider(grid_[i], objective(grid_[i]));
      const double a = grid_[std::max(i - 1, 0)];
      const double b = grid_[std::min(i + 1, n - 1)];
      const double t = golden(a, b);
      consider(t, objective(t));
    }
    return chosen_theta;
  }

  void append_next() {
    const double t = select();
    nodes_.push_back(t);
    for (int i = 0; i < kCandidates; ++i) logprod_[i] += std::log(std::abs(grid_[i] - t));
  }

  WeightKind kind_;
  std::mutex mutex_;
  std::vector<double> grid_;
  std::vector<double> logprod_;
  std::vector<double> nodes_;
};

LejaGenerator& generator(WeightKind kind) {
  static LejaGenerator uniform(WeightKind::UniformUnit);
  static LejaGenerator normal(WeightKind::StandardNormal);
  return kind == WeightKind::UniformUnit ? uniform : normal;
}

}  // namespace

std::vector<double> leja_nodes(WeightKind kind, int count) {
  if (count < 0) throw std::domain_error("negative node count");
  return generator(kind).first(count);
}

std::vector<double> compute_quad_weights(std::span<const double> nodes, const OrthoBasis1D& basis) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) return {};
  if (basis.max_degree() < n - 1) throw std::domain_error("basis degree too small for quadrature");
  Eigen::MatrixXd psi(n, n);
  std::vector<double> col(n);
  for (int j = 0; j < n; ++j) {
    basis.eval_all(nodes[j], col);
    for (int p = 0; p < n; ++p) psi(p, j) = col[p];
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(psi);
  if (!(lu.rcond() > 1e-15)) throw NumericalError("singular quadrature moment matrix");
  Eigen::VectorXd w = lu.solve(rhs);
  if (!w.allFinite()) throw NumericalError("non-finite quadrature weights");
  return {w.data(), w.data() + n};
}

std::vector<double> barycentric_weights(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t m = 0; m < n; ++m)
      if (m != j) w[j] /= (nodes[j] - nodes[m]);
  return w;
}

LejaRule1D::LejaRule1D(WeightKind kind, Growth growth, int initial_count) : kind_(kind), growth_(growth) {
  extend_to(std::max(initial_count, 1));
}

int LejaRule1D::max_level() const {
  int k = 0;
  while (count(k + 1) <= size()) ++k;
  return k;
}

void LejaRule1D::extend_to(int target_count) {
  if (target_count <= size()) return;
  const std::vector<double> all = leja_nodes(kind_, target_count);
  const OrthoBasis1D basis(kind_, target_count);
  for (int n = size(); n < target_count; ++n) {
    const double t = all[n];
    std::vector<double> w = bary_.empty() ? std::vector<double>{} : bary_.back();
    double wnew = 1.0;
    for (int m = 0; m < n; ++m) {
      w[m] /= (nodes_[m] - t);
      wnew /= (t - nodes_[m]);
    }
    w.push_back(wnew);
    nodes_.push_back(t);
    bary_.push_back(std::move(w));
    quad_.push_back(compute_quad_weights(nodes_, basis));
  }
}

std::span<const double> LejaRule1D::bary_weights(int n) const {
  if (n < 1 || n > size()) throw std::domain_error("node count not available in rule");
  return bary_[n - 1];
}

std::span<const double> LejaRule1D::quad_weights_for_count(int n) const {
  if (n < 1 || n > size()) throw std::domain_error("node count not available in rule");
  return quad_[n - 1];
}

void LejaRule1D::lagrange_basis(int n, double theta, std::span<double> out) const {
  if (static_cast<int>(out.size()) != n) throw std::domain_error("basis output length mismatch");
  const auto w = bary_weights(n);
  for (int j = 0; j < n; ++j) {
    if (std::abs(theta - nodes_[j]) <= 1e-14) {
      for (int m = 0; m < n; ++m) out[m] = m == j ? 1.0 : 0.0;
      return;
    }
  }
  double ell = 1.0;
  for (int j = 0; j < n; ++j) ell *= theta - nodes_[j];
  for (int j = 0; j < n; ++j) out[j] = ell * w[j] / (theta - nodes_[j]);
}

double LejaRule1D::interpolate(int level, std::span<const double> values, double theta) const {
  const int n = count(level);
  if (static_cast<int>(values.size()) != n) throw std::domain_error("value count does not match level");
  const auto w = bary_weights(n);
  double ell = 1.0, s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double diff = theta - nodes_[j];
    if (std::abs(diff) <= 1e-14) return values[j];
    ell *= diff;
    s += w[j] * values[j] / diff;
  }
  return ell * s;
}

double LejaRule1D::integrate(int level, std::span<const double> values) const {
  const int n = count(level);
  if (static_cast<int>(values.size()) != n) throw std::domain_error("value count does not match level");
  const auto w = quad_weights_for_count(n);
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += w[j] * values[j];
  return s;
}

LejaRule1D extend_leja(LejaRule1D rule, int target_count) {
  if (target_count < rule.size()) throw std::domain_error("target count below current size");
  rule.extend_to(target_count);
  return rule;
}

double interpolate_1d(const LejaRule1D& rule, int level, std::span<const double> values, double theta) {
  return rule.interpolate(level, values, theta);
}

std::vector<double> quad_weights(const LejaRule1D& rule, int level, const OrthoBasis1D& basis) {
  if (basis.kind() != rule.kind()) throw std::domain_error("basis and rule weight densities differ");
  const int n = rule.count(level);
  if (n > rule.size()) throw std::domain_error("level not available in rule");
  return compute_quad_weights(rule.nodes().first(n), basis);
}

double integrate_1d(const LejaRule1D& rule, int level, std::span<const double> values) {
  return rule.integrate(level, values);
}

}  // namespace mlleja
