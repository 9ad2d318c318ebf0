#include "mlleja/mcmc.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mlleja/rng.hpp"

namespace mlleja {

void MHConfig::validate() const {
  const auto d = static_cast<Eigen::Index>(theta0.size());
  if (n_samples == 0) throw std::domain_error("MH needs at least one sample");
  if (d == 0) throw std::domain_error("MH needs a starting point");
  if (proposal_cov.rows() != d || proposal_cov.cols() != d) throw std::domain_error("proposal covariance shape mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(proposal_cov);
  if (llt.info() != Eigen::Success) throw std::domain_error("proposal covariance not positive definite");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw std::domain_error("burn-in fraction must lie in [0, 1)");
}

MHResult run_mh(const LogDensity& log_target, const MHConfig& config) {
  config.validate();
  const int d = static_cast<int>(config.theta0.size());
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(config.proposal_cov).matrixL();
  CounterRng rng = CounterRng(config.seed).split(0x3C3C);

  MHResult res;
  res.dim = d;
  res.first_iteration = static_cast<std::size_t>(std::floor(config.burn_in * config.n_samples));
  const std::size_t kept = config.n_samples - res.first_iteration;
  res.samples.reserve(kept * d);
  res.log_post.reserve(kept);
  res.accepted.reserve(kept);

  std::vector<double> cur = config.theta0, prop(d);
  double cur_lp = log_target(cur);
  std::size_t n_acc = 0;
  Eigen::VectorXd z(d);
  for (std::size_t it = 0; it < config.n_samples; ++it) {
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    const Eigen::VectorXd step = chol * z;
    for (int i = 0; i < d; ++i) prop[i] = cur[i] + step(i);
    const double u = rng.uniform();
    const double prop_lp = log_target(prop);
    bool acc = false;
    if (prop_lp > -INFINITY && (cur_lp == -INFINITY || std::log(u) < prop_lp - cur_lp)) {
      cur = prop;
      cur_lp = prop_lp;
      acc = true;
      ++n_acc;
    }
    if (it >= res.first_iteration) {
      res.samples.insert(res.samples.end(), cur.begin(), cur.end());
      res.log_post.push_back(cur_lp);
      res.accepted.push_back(acc ? 1 : 0);
    }
  }
  res.acceptance_rate = static_cast<double>(n_acc) / static_cast<double>(config.n_samples);
  return res;
}

MHResult run_mh(const BayesProblem& problem, int mesh_level, const MHConfig& config) {
  return run_mh(
      [&](std::span<const double> theta) {
        if (!problem.in_prior_support(theta)) return -std::numeric_limits<double>::infinity();
        return problem.log_prior(theta) - problem.potential(theta, mesh_level);
      },
      config);
}

QoIEstimate estimate_qoi(const MHResult& chain,
                         const std::function<std::vector<double>(std::span<const double>)>& g, int batches) {
  const std::size_t n = chain.size();
  if (n == 0) throw std::domain_error("empty chain");
  std::vector<std::vector<double>> values;
  values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) values.push_back(g(chain.sample(i)));
  const std::size_t q = values.front().size();
  QoIEstimate est;
  est.mean.assign(q, 0.0);
  for (const auto& v : values)
    for (std::size_t k = 0; k < q; ++k) est.mean[k] += v[k];
  for (double& m : est.mean) m /= static_cast<double>(n);

  const std::size_t b = std::min<std::size_t>(std::max(batches, 2), n);
  const std::size_t len = n / b;
  est.std_error.assign(q, 0.0);
  if (len == 0 || b < 2) return est;
  for (std::size_t k = 0; k < q; ++k) {
    double ss = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      double bm = 0.0;
      for (std::size_t i = j * len; i < (j + 1) * len; ++i) bm += values[i][k];
      bm /= static_cast<double>(len);
      ss += (bm - est.mean[k]) * (bm - est.mean[k]);
    }
    est.std_error[k] = std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
  }
  return est;
}

void write_chain_csv(std::ostream& os, const MHResult& chain) {
  os << "iter";
  for (int i = 0; i < chain.dim; ++i) os << ",theta_" << (i + 1);
  os << ",log_post,accepted\n";
  os.precision(17);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    os << (chain.first_iteration + s);
    for (double v : chain.sample(s)) os << "," << v;
    os << "," << chain.log_post[s] << "," << static_cast<int>(chain.accepted[s]) << "\n";
  }
}

}  // namespace mlleja
