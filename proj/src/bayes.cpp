#include "mlleja/bayes.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mlleja/error.hpp"

namespace mlleja {

BayesProblem::BayesProblem(ForwardModel forward, std::vector<double> y, Eigen::MatrixXd noise_cov,
                           std::vector<WeightKind> prior)
    : forward_(std::move(forward)), y_(std::move(y)), noise_(std::move(noise_cov)), prior_(std::move(prior)) {
  if (noise_.rows() != n_obs() || noise_.cols() != n_obs()) throw std::domain_error("noise covariance shape mismatch");
  if (!noise_.isApprox(noise_.transpose(), 1e-12)) throw std::domain_error("noise covariance not symmetric");
  noise_llt_.compute(noise_);
  if (noise_llt_.info() != Eigen::Success) throw std::domain_error("noise covariance not positive definite");
  if (prior_.empty()) throw std::domain_error("prior needs at least one dimension");
}

BayesProblem BayesProblem::with_iid_noise(ForwardModel forward, std::vector<double> y, double sigma,
                                          std::vector<WeightKind> prior) {
  if (!(sigma > 0.0)) throw std::domain_error("noise level must be positive");
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n) * sigma * sigma;
  return BayesProblem(std::move(forward), std::move(y), std::move(cov), std::move(prior));
}

std::vector<double> BayesProblem::forward(std::span<const double> theta, int mesh_level) const {
  if (static_cast<int>(theta.size()) != dim()) throw std::domain_error("parameter dimension mismatch");
  auto g = forward_(theta, mesh_level);
  if (static_cast<int>(g.size()) != n_obs()) throw std::domain_error("forward model output size mismatch");
  return g;
}

double BayesProblem::potential_from_prediction(std::span<const double> prediction) const {
  Eigen::VectorXd r(n_obs());
  for (int i = 0; i < n_obs(); ++i) r(i) = y_[i] - prediction[i];
  const Eigen::VectorXd w = noise_llt_.matrixL().solve(r);
  return 0.5 * w.squaredNorm();
}

double BayesProblem::potential(std::span<const double> theta, int mesh_level) const {
  return potential_from_prediction(forward(theta, mesh_level));
}

bool BayesProblem::in_prior_support(std::span<const double> theta) const {
  for (int i = 0; i < dim(); ++i)
    if (!in_support(prior_[i], theta[i])) return false;
  return true;
}

double BayesProblem::log_prior(std::span<const double> theta) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += log_density(prior_[i], theta[i]);
  return s;
}

double likelihood_from_potential(double phi) { return std::exp(-phi); }

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol) {
  const int n = static_cast<int>(input.rows());
  if (input.cols() != n) throw std::domain_error("matrix must be square");
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return {a.diagonal(), v};
}

GaussianDensity gaussian_from_moments(const Eigen::VectorXd& m, const Eigen::MatrixXd& c) {
  const int d = static_cast<int>(m.size());
  if (c.rows() != d || c.cols() != d) throw std::domain_error("covariance shape mismatch");
  if (!m.allFinite() || !c.allFinite()) throw NumericalError("non-finite Gaussian moments");
  if ((c - c.transpose()).norm() > 1e-10 * std::max(1.0, c.norm())) throw std::domain_error("covariance not symmetric");
  const SymmetricEigen eig = jacobi_eigen(c);
  const double lmax = eig.values.maxCoeff();
  std::ostringstream detail;
  detail << " (mean " << m.transpose() << ", eigenvalues " << eig.values.transpose() << ")";
  if (!(lmax > 0.0)) throw NumericalError("covariance has no positive eigenvalue" + detail.str());
  Eigen::VectorXd lam = eig.values;
  bool clamped = false;
  for (int i = 0; i < d; ++i) {
    if (lam(i) < -1e-8 * lmax) throw NumericalError("indefinite covariance matrix" + detail.str());
    if (lam(i) < 1e-12 * lmax) {
      lam(i) = 1e-12 * lmax;
      clamped = true;
    }
  }
  GaussianDensity g;
  g.mean = m;
  const Eigen::MatrixXd& v = eig.vectors;
  g.cov = clamped ? Eigen::MatrixXd(v * lam.asDiagonal() * v.transpose()) : Eigen::MatrixXd(0.5 * (c + c.transpose()));
  g.sqrt_cov = v * lam.cwiseSqrt().asDiagonal() * v.transpose();
  g.inv_sqrt_cov = v * lam.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) logdet += std::log(2.0 * std::numbers::pi * lam(i));
  g.log_norm_const = -0.5 * logdet;
  return g;
}

double GaussianDensity::log_density(std::span<const double> theta) const {
  Eigen::VectorXd r(dim());
  for (int i = 0; i < dim(); ++i) r(i) = theta[i] - mean(i);
  return log_norm_const - 0.5 * (inv_sqrt_cov * r).squaredNorm();
}

std::vector<double> GaussianDensity::transport(std::span<const double> zeta) const {
  const Eigen::VectorXd t = mean + sqrt_cov * Eigen::Map<const Eigen::VectorXd>(zeta.data(), dim());
  return {t.data(), t.data() + dim()};
}

std::vector<double> GaussianDensity::inverse_transport(std::span<const double> theta) const {
  const Eigen::VectorXd z = inv_sqrt_cov * (Eigen::Map<const Eigen::VectorXd>(theta.data(), dim()) - mean);
  return {z.data(), z.data() + dim()};
}

nlohmann::json to_json(const GaussianDensity& g) {
  std::vector<double> c(g.cov.data(), g.cov.data() + g.cov.size());
  // Eigen is column-major; C is symmetric so row-major order is identical.
  return {{"m", std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size())}, {"C", c}};
}

GaussianDensity gaussian_from_json(const nlohmann::json& j) {
  const auto m = j.at("m").get<std::vector<double>>();
  const auto c = j.at("C").get<std::vector<double>>();
  const int d = static_cast<int>(m.size());
  if (static_cast<int>(c.size()) != d * d) throw std::domain_error("covariance size mismatch");
  Eigen::MatrixXd cov(d, d);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s) cov(r, s) = c[r * d + s];
  return gaussian_from_moments(Eigen::Map<const Eigen::VectorXd>(m.data(), d), cov);
}

Coordinates Coordinates::identity(std::vector<WeightKind> weights) {
  const auto d = static_cast<Eigen::Index>(weights.size());
  return {std::move(weights), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d),
          Eigen::MatrixXd::Identity(d, d)};
}

Coordinates Coordinates::from_gaussian(const GaussianDensity& g) {
  return {std::vector<WeightKind>(g.dim(), WeightKind::StandardNormal), g.mean, g.sqrt_cov, g.inv_sqrt_cov};
}

std::vector<double> Coordinates::to_theta(std::span<const double> zeta) const {
  const Eigen::VectorXd t = shift + scale * Eigen::Map<const Eigen::VectorXd>(zeta.data(), dim());
  return {t.data(), t.data() + dim()};
}

std::vector<double> Coordinates::to_reference(std::span<const double> theta) const {
  const Eigen::VectorXd z = inv_scale * (Eigen::Map<const Eigen::VectorXd>(theta.data(), dim()) - shift);
  return {z.data(), z.data() + dim()};
}

double PosteriorLevel::level_likelihood(std::span<const double> theta) const {
  if (!phi) return 1.0;
  return std::exp(-phi->evaluate(coords.to_reference(theta)));
}

double PosteriorLevel::log_density(std::span<const double> theta) const {
  double s = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (!in_support(prior[i], theta[i])) return -INFINITY;
    s += mlleja::log_density(prior[i], theta[i]);
  }
  for (const PosteriorLevel* l = this; l; l = l->parent.get()) {
    if (l->phi) s -= l->phi->evaluate(l->coords.to_reference(theta));
    s -= std::log(l->evidence);
  }
  return s;
}

bool PosteriorLevel::separable() const {
  for (const PosteriorLevel* l = this; l; l = l->parent.get()) {
    if (!l->phi) continue;
    for (const auto& [key, v] : l->phi->value_cache())
      if (v != 0.0) return false;
  }
  return true;
}

double posterior_density(const PosteriorLevel& level, std::span<const double> theta) {
  return std::exp(level.log_density(theta));
}

namespace {
std::atomic<std::size_t> g_cap_events{0};
}

std::size_t bias_ratio_cap_events() { return g_cap_events.load(); }

std::function<double(std::span<const double>)> bias_ratio(std::shared_ptr<const PosteriorLevel> level) {
  if (!level->gauss) throw std::logic_error("bias ratio needs the level's Gaussian approximation");
  return [level](std::span<const double> theta) {
    const double num = level->log_density(theta);
    if (num == -INFINITY) return 0.0;
    const double r = num - level->gauss->log_density(theta);
    if (r > std::log(kBiasRatioCap)) {
      if (g_cap_events.fetch_add(1) == 0)
        std::clog << "warning: posterior/Gaussian ratio exceeded " << kBiasRatioCap << "; capping\n";
      return kBiasRatioCap;
    }
    return std::exp(r);
  };
}

}  // namespace mlleja
