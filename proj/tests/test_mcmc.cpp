#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <algorithm>
#include <sstream>

#include "mlleja/mcmc.hpp"

using namespace mlleja;

namespace {

MHConfig config(std::size_t n, double step, int d, std::uint64_t seed = 1) {
  MHConfig c;
  c.n_samples = n;
  c.proposal_cov = Eigen::MatrixXd::Identity(d, d) * step;
  c.theta0 = std::vector<double>(d, 0.0);
  c.seed = seed;
  return c;
}

double std_normal_logpdf(std::span<const double> t) {
  double s = 0.0;
  for (double x : t) s -= 0.5 * x * x;
  return s;
}

std::function<std::vector<double>(std::span<const double>)> identity() {
  return [](std::span<const double> t) { return std::vector<double>(t.begin(), t.end()); };
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("standard normal target") {
  const auto chain = run_mh(std_normal_logpdf, config(100000, 0.5, 2));
  const auto est = estimate_qoi(chain, identity());
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(est.mean[i]) < 3.0 * est.std_error[i]);
    CHECK(est.std_error[i] < 0.02);
  }
  CHECK(chain.size() == 90000);
  CHECK(chain.first_iteration == 10000);
  const auto one = estimate_qoi(chain, [](std::span<const double>) { return std::vector{1.0}; });
  CHECK(one.mean[0] == 1.0);
}

TEST_CASE("conjugate posterior mean within three standard errors") {
  // G(theta) = theta, y = 0.8, sigma = 1, standard-normal prior.
  auto p = BayesProblem::with_iid_noise([](std::span<const double> t, int) { return std::vector<double>{t[0]}; },
                                        {0.8}, 1.0, {WeightKind::StandardNormal});
  const auto chain = run_mh(p, 0, config(200000, 1.0, 1, 3));
  const auto est = estimate_qoi(chain, identity());
  CHECK(std::abs(est.mean[0] - 0.4) < 3.0 * est.std_error[0]);
  CHECK(est.std_error[0] > 0.0);
}

TEST_CASE("two-state collapse matches the stationary probability") {
  const auto chain = run_mh(std_normal_logpdf, config(200000, 1.5, 1, 5));
  const auto est = estimate_qoi(chain, [](std::span<const double> t) { return std::vector{t[0] < 0.5 ? 1.0 : 0.0}; });
  const double exact = 0.5 * std::erfc(-0.5 / std::sqrt(2.0));
  CHECK(std::abs(est.mean[0] - exact) < 3.0 * est.std_error[0]);
}

TEST_CASE("determinism and acceptance behaviour") {
  const auto a = run_mh(std_normal_logpdf, config(5000, 0.3, 2, 9));
  const auto b = run_mh(std_normal_logpdf, config(5000, 0.3, 2, 9));
  const auto c = run_mh(std_normal_logpdf, config(5000, 0.3, 2, 10));
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  double last = 1.0;
  for (double step : {0.1, 1.0, 10.0}) {
    const double rate = run_mh(std_normal_logpdf, config(20000, step, 2, 2)).acceptance_rate;
    CHECK(rate <= last);
    last = rate;
  }
  auto flat = [](std::span<const double> t) { return (t[0] >= 0.0 && t[0] <= 1.0) ? 0.0 : -INFINITY; };
  MHConfig tiny = config(20000, 1e-10, 1);
  tiny.theta0 = {0.5};
  CHECK(run_mh(flat, tiny).acceptance_rate > 0.999);
  MHConfig wide = config(20000, 4.0, 1);
  wide.theta0 = {0.5};
  const auto w = run_mh(flat, wide);
  for (double v : w.samples) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("chain output and invalid configurations") {
  const auto chain = run_mh(std_normal_logpdf, config(100, 0.5, 2));
  std::ostringstream os;
  write_chain_csv(os, chain);
  const auto text = os.str();
  CHECK(text.rfind("iter,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 91);

  MHConfig bad = config(100, 0.5, 2);
  bad.n_samples = 0;
  CHECK_THROWS_AS(run_mh(std_normal_logpdf, bad), std::domain_error);
  bad = config(100, -0.5, 2);
  CHECK_THROWS_AS(run_mh(std_normal_logpdf, bad), std::domain_error);
  bad = config(100, 0.5, 2);
  bad.burn_in = 1.0;
  CHECK_THROWS_AS(run_mh(std_normal_logpdf, bad), std::domain_error);
  CHECK_THROWS_AS(estimate_qoi(MHResult{}, identity()), std::domain_error);
}

}
