#include <doctest.h>

#include <stdexcept>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>

#include "mlleja/forward.hpp"
#include "mlleja/multilevel.hpp"

using namespace mlleja;

namespace {

constexpr auto U = WeightKind::UniformUnit;
constexpr auto N = WeightKind::StandardNormal;

// G(theta) = theta, y = 0.8, sigma = 5, standard-normal prior. Sharper
// likelihoods hit the accuracy floor of the truncated normal Leja rule.
constexpr double kY = 0.8, kSigma = 5.0;
constexpr double kPostVar = 1.0 / (1.0 + 1.0 / (kSigma * kSigma));
constexpr double kPostMean = kPostVar * kY / (kSigma * kSigma);

BayesProblem conjugate_problem() {
  return BayesProblem::with_iid_noise([](std::span<const double> t, int) { return std::vector<double>{t[0]}; }, {kY},
                                      kSigma, {N});
}

Qoi identity_qoi() {
  return [](std::span<const double> t) { return std::vector<double>(t.begin(), t.end()); };
}

BayesProblem tc1_problem() {
  const std::vector<double> truth{0.45, 0.65};
  const auto data = generate_data("sine", truth, AnalyticSineModel{}(truth), 0.1, 387, 0);
  return BayesProblem::with_iid_noise([](std::span<const double> t, int) { return AnalyticSineModel{}(t); }, data.y,
                                      0.1, {U, U});
}

}  // namespace

TEST_SUITE("multilevel") {

TEST_CASE("conjugate toy: level one matches the closed form") {
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-10, {}, 1e-13}};
  const auto out = level1(conjugate_problem(), c);
  CHECK(std::abs(out.posterior->mean(0) - kPostMean) < 1e-6);
  CHECK(std::abs(out.posterior->cov(0, 0) - kPostVar) < 1e-6);
  const double z = std::exp(-kY * kY / (2.0 * (1.0 + kSigma * kSigma))) / std::sqrt(1.0 + 1.0 / (kSigma * kSigma));
  CHECK(out.posterior->evidence == doctest::Approx(z).epsilon(1e-6));
}

TEST_CASE("conjugate toy: a level update on an identical model is invariant") {
  // The forward model ignores the mesh, so both levels see the same potential.
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-10, {}, 1e-13}, LevelSettings{1, 1e-10, {}, 1e-13}};
  const auto p = conjugate_problem();
  const auto one = level1(p, c);
  const auto two = level_update(one.posterior, p, c, 2);
  CHECK(std::abs(two.posterior->mean(0) - one.posterior->mean(0)) < 1e-5);
  CHECK(std::abs(two.posterior->cov(0, 0) - one.posterior->cov(0, 0)) < 1e-5);
  CHECK(two.posterior->evidence == doctest::Approx(1.0).epsilon(1e-5));
  const auto full = run_multilevel(p, c, identity_qoi(), 1);
  CHECK(std::abs(full.qoi[0] - kPostMean) < 1e-5);
  c.variant = Variant::StdML;
  const auto std_run = run_stdml(p, c, identity_qoi(), 1);
  CHECK(std::abs(std_run.qoi[0] - kPostMean) < 1e-5);
  REQUIRE(std_run.per_level.size() == 2);
  CHECK(std::abs(std_run.per_level[0][0] - std_run.per_level[1][0]) < 1e-10);
}

TEST_CASE("flat likelihood: evidence one, prior moments") {
  auto p = BayesProblem::with_iid_noise([](std::span<const double>, int) { return std::vector<double>{0.0}; }, {0.0},
                                        1.0, {U, U});
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-8, {}, 1e-12}, LevelSettings{1, 1e-8, {}, 1e-12}};
  const auto r = run_multilevel(p, c, identity_qoi(), 2);
  CHECK(r.qoi[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(r.qoi[1] == doctest::Approx(0.5).epsilon(1e-8));
  for (const auto& l : r.ledger.levels) CHECK(l.evidence == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("normalization: qoi of one integrates to one") {
  const auto p = tc1_problem();
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-6, {}, 1e-11}};
  const auto r = run_multilevel(p, c, [](std::span<const double>) { return std::vector{1.0}; }, 1);
  CHECK(r.qoi[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("single-level run on the sine problem") {
  const auto p = tc1_problem();
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-6, {}, 1e-11}};
  auto g = [](std::span<const double> t) { return std::vector{std::exp(-t[0] - t[1])}; };
  const auto r = run_multilevel(p, c, g, 1);
  CHECK(std::abs(r.qoi[0] - 0.33811) < 5e-4);
  const auto prior = prior_weighted_quadrature(p, 0, g, 1, 1e-11, 40);
  CHECK(std::abs(prior.qoi[0] - r.qoi[0]) < 5e-4);
  CHECK(prior.nodes >= 800);
  CHECK(prior.nodes <= 3200);
  const auto post = posterior_weighted_quadrature(p, 0, g, 1, 1e-11, 1e-5, 40, 8);
  CHECK(std::abs(post.qoi[0] - prior.qoi[0]) < 2e-3);
  CHECK(post.nodes <= 150);
  c.variant = Variant::StdML;
  const auto s = run_stdml(p, c, g, 1);
  CHECK(std::abs(s.qoi[0] - prior.qoi[0]) < 1e-4);
}

TEST_CASE("ledger counts reconcile with an instrumented forward model") {
  std::mutex mu;
  std::map<int, std::size_t> calls;
  PoissonSourceModel2D model(0.2);
  const std::vector<double> truth{0.35, 0.65};
  const auto data = generate_data("poisson", truth, model.sensors(truth, 6), 0.2, 1895, 6);
  auto fwd = [&](std::span<const double> t, int mesh) {
    {
      std::lock_guard lock(mu);
      ++calls[mesh];
    }
    return model.sensors_fast(t, mesh);
  };
  auto p = BayesProblem::with_iid_noise(fwd, data.y, 0.2, {U, U});
  MultilevelConfig c;
  c.levels = {LevelSettings{4, 1e-4, {1e-6, 1e-6}, 1e-11}, LevelSettings{5, 1e-3, {1e-5, 1e-5}, 1e-10}};
  for (auto v : {Variant::MLLejaStd, Variant::MLLejaDV}) {
    calls.clear();
    c.variant = v;
    const auto r = run_multilevel(p, c, identity_qoi(), 2);
    CHECK(r.ledger.forward_by_mesh() == calls);
    CHECK(r.ledger.levels.size() == 2);
    CHECK(r.ledger.levels[1].forward_by_mesh.at(4) == r.ledger.levels[1].interp_nodes);
  }
  calls.clear();
  c.variant = Variant::StdML;
  const auto s = run_stdml(p, c, identity_qoi(), 2);
  CHECK(s.ledger.forward_by_mesh() == calls);
}

TEST_CASE("shared nodes are evaluated once across an integral family") {
  std::atomic<std::size_t> base_calls{0};
  auto base = [&](std::span<const double> t) {
    ++base_calls;
    return std::exp(-4.0 * (t[0] - 0.3) * (t[0] - 0.3) - (t[1] - 0.6) * (t[1] - 0.6));
  };
  auto inside = [](std::span<const double>) { return true; };
  std::vector<std::function<double(std::span<const double>)>> f{
      [](std::span<const double>) { return 1.0; }, [](std::span<const double> t) { return t[0]; },
      [](std::span<const double> t) { return t[1] * t[1]; }};
  const auto fam = integrate_family(Coordinates::identity({U, U}), base, inside, f, 1e-12, 30);
  CHECK(fam.unique_evals == base_calls.load());
  CHECK(fam.values.size() == 3);
  CHECK(fam.values[0] > 0.0);
}

TEST_CASE("configuration validation") {
  MultilevelConfig c;
  CHECK_THROWS_AS(c.validate(2), std::domain_error);
  c.levels = {LevelSettings{5, 1e-3, {}, 1e-10}, LevelSettings{4, 1e-3, {}, 1e-10}};
  CHECK_THROWS_AS(c.validate(2), std::domain_error);
  c.levels = {LevelSettings{4, 1e-3, {}, 1e-10}, LevelSettings{5, 1e-4, {}, 1e-10}};
  CHECK_THROWS_AS(c.validate(2), std::domain_error);
  c.levels = {LevelSettings{4, 1e-4, {}, 1e-10}, LevelSettings{5, 1e-3, {}, 1e-10}};
  CHECK_NOTHROW(c.validate(2));
  c.variant = Variant::MLLejaDV;
  CHECK_THROWS_AS(c.validate(2), std::domain_error);
  CHECK(variant_from_string(to_string(Variant::MLLejaDV)) == Variant::MLLejaDV);
}

}
