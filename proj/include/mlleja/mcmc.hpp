#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mlleja/bayes.hpp"

namespace mlleja {

struct MHConfig {
  std::size_t n_samples = 0;  // total iterations including burn-in
  Eigen::MatrixXd proposal_cov;
  std::vector<double> theta0;
  std::uint64_t seed = 0;
  double burn_in = 0.1;

  void validate() const;
};

struct MHResult {
  int dim = 0;
  std::size_t first_iteration = 0;  // iteration index of samples[0]
  std::vector<double> samples;      // (n_kept x dim), row-major
  std::vector<double> log_post;
  std::vector<char> accepted;
  double acceptance_rate = 0.0;     // over all iterations

  std::size_t size() const { return log_post.size(); }
  std::span<const double> sample(std::size_t i) const { return {samples.data() + i * dim, static_cast<std::size_t>(dim)}; }
};

using LogDensity = std::function<double(std::span<const double>)>;

// Random-walk Metropolis with a Gaussian proposal on an unnormalized
// log-density; proposals with log-density -inf are always rejected.
MHResult run_mh(const LogDensity& log_target, const MHConfig& config);
// Target log pi_0 - Phi on the given mesh.
MHResult run_mh(const BayesProblem& problem, int mesh_level, const MHConfig& config);

struct QoIEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;  // batch means
};

QoIEstimate estimate_qoi(const MHResult& chain,
                         const std::function<std::vector<double>(std::span<const double>)>& g, int batches = 50);

void write_chain_csv(std::ostream& os, const MHResult& chain);

}  // namespace mlleja
