// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// below. `--expect-fail N` marks criterion N as a known failure: the line
// still reads FAIL, but the exit status only changes if the set of failing
// criteria differs from the expected one.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlleja/adaptive.hpp"
#include "mlleja/experiment.hpp"
#include "mlleja/multilevel.hpp"
#include "mlleja/sparse.hpp"
#include "mlleja/univariate.hpp"

using namespace mlleja;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr auto U = WeightKind::UniformUnit;
constexpr auto N = WeightKind::StandardNormal;

// pinned tolerances
constexpr double kTc1PairTol = 2e-3;
constexpr int kTc1MaxPostNodes = 150;
constexpr double kTc1MinNodeRatio = 5.0;
constexpr double kTc1MaxSeconds = 60.0;
constexpr double kTc2MhTol = 5e-3;
constexpr double kTc2RefTol = 1.5e-2;
constexpr double kTc2RefMean[2] = {0.363, 0.637};
constexpr double kTc2MaxSeconds = 1200.0;
constexpr double kCostMinRatio = 5.0;
constexpr double kMomentTol = 1e-9;
constexpr double kTelescopeTol = 1e-12;
constexpr double kNormMcRelTol = 0.02;
constexpr int kNormMcSamples = 100000;
constexpr double kConjugateLevel1Tol = 1e-6;
constexpr double kConjugateLevel2Tol = 1e-5;
constexpr double kTc3StdTol = 2e-2;
constexpr double kTc3Deviation = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Runner {
  fs::path root;
  std::map<std::string, RunReport> cache;

  const RunReport& run(TestCase tc, Method m) {
    const auto key = to_string(tc) + "_" + to_string(m);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    RunOptions o;
    o.out_dir = root / key;
    o.quiet = true;
    auto report = run_experiment(default_config(tc, m), o);
    std::printf("    ran %-28s status %-18s %7.2f s\n", key.c_str(), report.result.value("status", "?").c_str(),
                report.result.value("wall_time_s", 0.0));
    std::fflush(stdout);
    return cache.emplace(key, std::move(report)).first->second;
  }
};

std::vector<double> qoi(const RunReport& r) {
  return r.result.contains("qoi") ? r.result["qoi"].get<std::vector<double>>() : std::vector<double>{};
}

bool ok(const RunReport& r) { return r.result.value("status", "") == "ok"; }

// ---------------------------------------------------------------------------

Outcome sine_case(Runner& runner) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& mh = runner.run(TestCase::TC1_Sine, Method::MH);
  const auto& pr = runner.run(TestCase::TC1_Sine, Method::PriorQuad);
  const auto& po = runner.run(TestCase::TC1_Sine, Method::PosteriorQuad);
  const double elapsed = seconds_since(t0);
  if (!ok(mh) || !ok(pr) || !ok(po)) return {false, "a run did not complete"};
  const double a = qoi(mh)[0], b = qoi(pr)[0], c = qoi(po)[0];
  const double worst = std::max({std::abs(a - b), std::abs(a - c), std::abs(b - c)});
  const int post_nodes = po.result["quad_nodes"].get<int>();
  const int prior_nodes = pr.result["quad_nodes"].get<int>();
  const double ratio = static_cast<double>(prior_nodes) / post_nodes;
  const bool pass = worst <= kTc1PairTol && post_nodes <= kTc1MaxPostNodes && ratio >= kTc1MinNodeRatio &&
                    elapsed < kTc1MaxSeconds;
  return {pass, fmt("MH %.5f, PriorQuad %.5f (%d nodes), PosteriorQuad %.5f (%d nodes + %d setup); max pair gap "
                    "%.1e; node ratio %.1fx; %.1f s",
                    a, b, prior_nodes, c, post_nodes, po.result["setup_nodes"].get<int>(), worst, ratio, elapsed)};
}

Outcome one_source_case(Runner& runner) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& mh = runner.run(TestCase::TC2_OneSource, Method::MH);
  if (!ok(mh)) return {false, "MH reference failed"};
  const auto ref = qoi(mh);
  std::string detail = fmt("MH (%.4f, %.4f)", ref[0], ref[1]);
  bool pass = true;
  for (Method m : {Method::StdML, Method::MLLejaStd, Method::MLLejaDV}) {
    const auto& r = runner.run(TestCase::TC2_OneSource, m);
    if (!ok(r)) {
      pass = false;
      detail += "; " + to_string(m) + " failed";
      continue;
    }
    const auto q = qoi(r);
    double d_mh = 0.0, d_ref = 0.0;
    for (int i = 0; i < 2; ++i) {
      d_mh = std::max(d_mh, std::abs(q[i] - ref[i]));
      d_ref = std::max(d_ref, std::abs(q[i] - kTc2RefMean[i]));
    }
    pass = pass && d_mh <= kTc2MhTol && d_ref <= kTc2RefTol;
    detail += fmt("; %s (%.4f, %.4f) |d_MH| %.1e |d_ref| %.1e", to_string(m).c_str(), q[0], q[1], d_mh, d_ref);
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < kTc2MaxSeconds;
  return {pass, detail + fmt("; %.1f s", elapsed)};
}

Outcome cost_separation(Runner& runner) {
  const auto& s = runner.run(TestCase::TC2_OneSource, Method::StdML);
  const auto& a = runner.run(TestCase::TC2_OneSource, Method::MLLejaStd);
  const auto& b = runner.run(TestCase::TC2_OneSource, Method::MLLejaDV);
  if (!ok(s) || !ok(a) || !ok(b)) return {false, "a run did not complete"};
  auto finest = [](const RunReport& r) { return r.result["ledger"]["levels"].back()["interp_evals"].get<double>(); };
  const double ns = finest(s), na = finest(a), nb = finest(b);
  const bool pass = ns / na >= kCostMinRatio && ns / nb >= kCostMinRatio && nb <= na;
  return {pass, fmt("finest-level interpolation nodes: StdML %.0f, MLLejaStd %.0f (%.1fx fewer), MLLejaDV %.0f "
                    "(%.1fx fewer)",
                    ns, na, ns / na, nb, ns / nb)};
}

double monomial_moment(WeightKind kind, int p) {
  if (kind == U) return 1.0 / (p + 1);
  if (p % 2) return 0.0;
  double m = 1.0;
  for (int k = p - 1; k > 0; k -= 2) m *= k;
  return m;
}

Outcome quadrature_exactness() {
  double worst = 0.0;
  int checks = 0;
  for (auto kind : {U, N})
    for (auto growth : {Growth::Interp, Growth::Quad}) {
      LejaRule1D rule(kind, growth, level_size(growth, 5));
      for (int k = 1; k <= 5; ++k) {
        const int nk = level_size(growth, k);
        const auto w = rule.quad_weights(k);
        for (int p = 0; p < nk; ++p) {
          double s = 0.0;
          for (int j = 0; j < nk; ++j) s += w[j] * std::pow(rule.node(j), p);
          worst = std::max(worst, std::abs(s - monomial_moment(kind, p)));
          ++checks;
        }
      }
    }
  return {worst <= kMomentTol, fmt("%d moments, both densities and growth rules, max error %.1e", checks, worst)};
}

using Fn = std::function<double(std::span<const double>)>;

SparseSurrogate build_box(std::vector<WeightKind> w, const MultiIndex& top, const Fn& f) {
  SparseSurrogate s(std::move(w), OperatorKind::Interp, 12);
  auto set = full_box(top);
  std::vector<MultiIndex> order(set.begin(), set.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.sum() < b.sum(); });
  for (const auto& k : order) {
    for (const auto& ord : s.pending_nodes(k)) s.store_value(ord, f(s.node_point(ord)));
    s.add_index(k);
  }
  return s;
}

Outcome telescoping() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (const auto& top : {MultiIndex({8}), MultiIndex({5, 4}), MultiIndex({3, 4, 3})}) {
    for (auto kind : {U, N}) {
      std::vector<WeightKind> w(top.dim(), kind);
      Fn f = [](std::span<const double> t) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += std::cos(0.7 * (i + 1) * t[i]);
        return std::exp(0.5 * s);
      };
      auto s = build_box(w, top, f);
      const auto g = make_tensor_grid(top, Growth::Interp);
      std::vector<double> vals(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) vals[i] = f(s.node_point(g.ordinals(i)));
      for (int i = 0; i < 100; ++i) {
        std::vector<double> x;
        for (auto k : w)
          x.push_back(k == U ? std::uniform_real_distribution<double>(0, 1)(rng) : std::normal_distribution<double>()(rng));
        const double ref = tensor_interpolate(s.rules(), g, vals, x);
        worst = std::max(worst, std::abs(s.evaluate(x) - ref) / std::max(1.0, std::abs(ref)));
      }
    }
  }
  return {worst <= kTelescopeTol, fmt("dimensions 1-3, both densities, 600 points, max deviation %.1e", worst)};
}

Outcome spectral_norm() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 5; ++trial) {
    // random bivariate polynomial of total degree <= 4
    std::vector<std::pair<std::pair<int, int>, double>> terms;
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; a + b <= 4; ++b) terms.push_back({{a, b}, coef(rng)});
    Fn f = [terms](std::span<const double> t) {
      double s = 0.0;
      for (const auto& [p, c] : terms) s += c * std::pow(t[0], p.first) * std::pow(t[1], p.second);
      return s;
    };
    auto s = build_box({U, U}, MultiIndex({4, 4}), f);
    for (const auto& k : s.index_set()) {
      const double norm = s.surplus_norm(k);
      if (norm < 1e-8) continue;
      double acc = 0.0;
      for (int i = 0; i < kNormMcSamples; ++i) {
        const std::vector<double> x{unit(rng), unit(rng)};
        const double d = s.surplus_apply(k, x);
        acc += d * d;
      }
      worst = std::max(worst, std::abs(std::sqrt(acc / kNormMcSamples) - norm) / norm);
      ++checked;
    }
  }
  return {worst <= kNormMcRelTol,
          fmt("5 random degree-4 polynomials, %d surplus norms vs 1e5-sample MC, max relative gap %.2e", checked, worst)};
}

Outcome conjugate() {
  // G(theta) = theta, y = 0.8, sigma = 5, standard-normal prior
  const double y = 0.8, sigma = 5.0;
  const double var = 1.0 / (1.0 + 1.0 / (sigma * sigma));
  const double mean = var * y / (sigma * sigma);
  auto p = BayesProblem::with_iid_noise([](std::span<const double> t, int) { return std::vector<double>{t[0]}; }, {y},
                                        sigma, {N});
  MultilevelConfig c;
  c.levels = {LevelSettings{0, 1e-10, {}, 1e-13}, LevelSettings{1, 1e-10, {}, 1e-13}};
  const auto one = level1(p, c);
  const auto two = level_update(one.posterior, p, c, 2);
  const double e1 = std::max(std::abs(one.posterior->mean(0) - mean), std::abs(one.posterior->cov(0, 0) - var));
  const double e2 = std::max(std::abs(two.posterior->mean(0) - one.posterior->mean(0)),
                             std::abs(two.posterior->cov(0, 0) - one.posterior->cov(0, 0)));
  return {e1 <= kConjugateLevel1Tol && e2 <= kConjugateLevel2Tol,
          fmt("level 1 vs closed form %.1e; level-2 update on an identical model moves moments by %.1e", e1, e2)};
}

Outcome freezing() {
  AdaptiveConfig c;
  c.tol = 1e-14;
  c.k_max = 20;
  c.directional_tols = std::vector{1e-10, 1e-6};
  const auto r = run_directional(c, serial_pointwise([](std::span<const double> t) { return std::pow(t[0], 4) + 1e-4 * t[1]; }),
                                 {U, U});
  const int k1 = r.surrogate.index_set().max_component(0), k2 = r.surrogate.index_set().max_component(1);
  return {k2 <= 2 && k1 >= 4, fmt("max k_1 = %d, max k_2 = %d, %zu indices, stop: %s", k1, k2,
                                  r.surrogate.index_set().size(), r.state.stop_reason.c_str())};
}

Outcome two_source_case(Runner& runner) {
  const auto& s = runner.run(TestCase::TC3_TwoSource, Method::StdML);
  bool pass = ok(s);
  std::string detail;
  if (ok(s)) {
    const auto q = qoi(s);
    const double d = std::max(std::abs(q[0] - 0.5), std::abs(q[1] - 0.5));
    pass = d <= kTc3StdTol;
    detail = fmt("StdML (%.4f, %.4f) |d| %.1e", q[0], q[1], d);
  } else {
    detail = "StdML failed: " + s.result.value("error", "");
  }
  for (Method m : {Method::MLLejaStd, Method::MLLejaDV}) {
    const auto& r = runner.run(TestCase::TC3_TwoSource, m);
    if (ok(r)) {
      const auto q = qoi(r);
      const double d = std::max(std::abs(q[0] - 0.5), std::abs(q[1] - 0.5));
      pass = pass && d > kTc3Deviation;
      detail += fmt("; %s (%.4f, %.4f) max deviation %.2f", to_string(m).c_str(), q[0], q[1], d);
    } else {
      // No final mean exists, so the deviation cannot be assessed.
      pass = false;
      detail += "; " + to_string(m) + " produced no mean: " + r.result.value("error", "");
    }
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> expect_fail;
  std::string workdir;
  app.add_option("--expect-fail", expect_fail, "criteria known to fail");
  app.add_option("--workdir", workdir, "directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  Runner runner;
  runner.root = workdir.empty() ? fs::temp_directory_path() / ("mlleja_acceptance_" + std::to_string(std::random_device{}()))
                                : fs::path(workdir);
  fs::create_directories(runner.root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"sine case: MH, prior- and posterior-weighted quadrature agree; node counts", [&] { return sine_case(runner); }},
      {"one-source case: multilevel means vs own MH and published means", [&] { return one_source_case(runner); }},
      {"cost separation at the finest level", [&] { return cost_separation(runner); }},
      {"quadrature exactness", quadrature_exactness},
      {"telescoping oracle", telescoping},
      {"spectral-norm oracle", spectral_norm},
      {"conjugate-posterior oracle", conjugate},
      {"directional freezing", freezing},
      {"two-source failure-mode regression", [&] { return two_source_case(runner); }},
  };

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(id);
    std::printf("%s  %2d  %s\n      %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("N/A   10  three-dimensional experiment: out of scope, no pipeline provided\n");

  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  std::printf("\n%zu of %zu criteria pass", criteria.size() - failed.size(), criteria.size());
  if (!expected.empty()) {
    std::printf("; expected failures:");
    for (int e : expected) std::printf(" %d", e);
  }
  std::printf("\n");
  if (workdir.empty()) fs::remove_all(runner.root);
  return failed == expected ? 0 : 1;
}
