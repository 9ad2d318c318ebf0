#include "mlleja/multilevel.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "mlleja/error.hpp"

namespace mlleja {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::StdML: return "StdML";
    case Variant::MLLejaStd: return "MLLejaStd";
    case Variant::MLLejaDV: return "MLLejaDV";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "StdML") return Variant::StdML;
  if (s == "MLLejaStd") return Variant::MLLejaStd;
  if (s == "MLLejaDV") return Variant::MLLejaDV;
  throw std::domain_error("unknown variant '" + s + "'");
}

void MultilevelConfig::validate(int dim) const {
  if (levels.empty()) throw std::domain_error("at least one level is required");
  if (k_max_interp < 1 || k_max_quad < 1 || k_max_interp_gauss < 1 || k_max_quad_gauss < 1) throw std::domain_error("k_max must be >= 1");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const auto& l = levels[j];
    if (!(l.tol_in > 0.0) || !(l.tol_qu > 0.0)) throw std::domain_error("tolerances must be positive");
    if (variant == Variant::MLLejaDV) {
      if (static_cast<int>(l.tau_in.size()) != dim) throw std::domain_error("directional tolerances needed per dimension");
      for (double t : l.tau_in)
        if (!(t > 0.0)) throw std::domain_error("directional tolerances must be positive");
    }
    if (j > 0) {
      const auto& p = levels[j - 1];
      if (l.mesh_level <= p.mesh_level) throw std::domain_error("mesh levels must increase with level");
      if (l.tol_in < p.tol_in || l.tol_qu < p.tol_qu)
        throw std::domain_error("tolerances must not decrease from coarse to fine level");
    }
  }
}

namespace {
bool any_normal(const std::vector<WeightKind>& w) {
  for (WeightKind k : w)
    if (k == WeightKind::StandardNormal) return true;
  return false;
}
}  // namespace

int MultilevelConfig::interp_cap(const std::vector<WeightKind>& w) const {
  return any_normal(w) ? k_max_interp_gauss : k_max_interp;
}

int MultilevelConfig::quad_cap(const std::vector<WeightKind>& w) const {
  return any_normal(w) ? k_max_quad_gauss : k_max_quad;
}

std::map<int, std::size_t> CostLedger::forward_by_mesh() const {
  std::map<int, std::size_t> total;
  for (const auto& l : levels)
    for (const auto& [mesh, n] : l.forward_by_mesh) total[mesh] += n;
  return total;
}

namespace {

nlohmann::json eigen_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json eigen_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StepObserver make_observer(const TraceSink& trace, const std::string& phase, int level) {
  if (!trace) return {};
  return [trace, phase, level](const StepRecord& r, const SparseSurrogate&) {
    nlohmann::json j = to_json(r);
    j["phase"] = phase;
    j["level"] = level;
    trace(j);
  };
}

struct NodeMemo {
  std::mutex mutex;
  std::unordered_map<NodeKey, double> values;
  std::atomic<std::size_t> skipped{0};
};

}  // namespace

nlohmann::json to_json(const LevelCost& c) {
  nlohmann::json fwd = nlohmann::json::object();
  for (const auto& [mesh, n] : c.forward_by_mesh) fwd[std::to_string(mesh)] = n;
  return {{"level", c.level},
          {"mesh", c.mesh_level},
          {"tol_in", c.tol_in},
          {"tol_qu", c.tol_qu},
          {"interp_evals", c.interp_nodes},
          {"forward_by_mesh", fwd},
          {"interp_out_of_support", c.interp_out_of_support},
          {"quad_evals", c.quad_evals},
          {"quad_skipped", c.quad_skipped},
          {"evidence", c.evidence},
          {"m", eigen_json(c.mean)},
          {"C", eigen_json(c.cov)},
          {"interp_stop", c.interp_stop},
          {"wall_time_s", c.wall_time_s}};
}

nlohmann::json to_json(const CostLedger& c) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : c.levels) levels.push_back(to_json(l));
  nlohmann::json fwd = nlohmann::json::object();
  for (const auto& [mesh, n] : c.forward_by_mesh()) fwd[std::to_string(mesh)] = n;
  return {{"levels", levels}, {"final_quad_evals", c.final_quad_evals}, {"forward_by_mesh", fwd}};
}

IntegralFamily integrate_family(const Coordinates& coords, const std::function<double(std::span<const double>)>& base,
                                const std::function<bool(std::span<const double>)>& support,
                                const std::vector<std::function<double(std::span<const double>)>>& factors,
                                double tol, int k_max, const TraceSink& trace, const std::string& phase) {
  NodeMemo memo;
  IntegralFamily out;
  for (std::size_t q = 0; q < factors.size(); ++q) {
    const auto& factor = factors[q];
    BatchModel model = [&](const EvaluationBatch& batch, std::span<double> values) {
      const long n = static_cast<long>(batch.size());
      std::vector<long> todo;
      {
        std::lock_guard lock(memo.mutex);
        for (long i = 0; i < n; ++i)
          if (!memo.values.count(batch.keys[i])) todo.push_back(i);
      }
      std::vector<double> fresh(todo.size());
      std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
      for (long t = 0; t < static_cast<long>(todo.size()); ++t) {
        try {
          const auto theta = coords.to_theta(batch.point(todo[t]));
          if (!support(theta)) {
            fresh[t] = 0.0;
            ++memo.skipped;
          } else {
            fresh[t] = base(theta);
            if (!std::isfinite(fresh[t])) throw ModelEvaluationError("non-finite integrand");
          }
        } catch (...) {
#pragma omp critical(mlleja_family_failure)
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
      std::lock_guard lock(memo.mutex);
      for (std::size_t t = 0; t < todo.size(); ++t) memo.values[batch.keys[todo[t]]] = fresh[t];
      for (long i = 0; i < n; ++i) {
        const double b = memo.values.at(batch.keys[i]);
        values[i] = b == 0.0 ? 0.0 : b * factor(coords.to_theta(batch.point(i)));
      }
    };
    AdaptiveConfig ac;
    ac.tol = tol;
    ac.k_max = k_max;
    ac.kind = OperatorKind::Quad;
    const auto res = run_standard(ac, model, coords.weights, make_observer(trace, phase + "[" + std::to_string(q) + "]", 0));
    out.values.push_back(res.surrogate.integrate());
    out.stop_reasons.push_back(res.state.stop_reason);
  }
  out.unique_evals = memo.values.size() - memo.skipped.load();
  out.skipped = memo.skipped.load();
  return out;
}

Moments posterior_moments(const Coordinates& coords, const std::function<double(std::span<const double>)>& base,
                          const std::function<bool(std::span<const double>)>& support, double tol, int k_max,
                          const TraceSink& trace, const std::string& phase) {
  const int d = coords.dim();
  std::vector<std::function<double(std::span<const double>)>> f;
  f.push_back([](std::span<const double>) { return 1.0; });
  for (int i = 0; i < d; ++i) f.push_back([i](std::span<const double> t) { return t[i]; });
  for (int i = 0; i < d; ++i)
    for (int k = i; k < d; ++k) f.push_back([i, k](std::span<const double> t) { return t[i] * t[k]; });
  const IntegralFamily fam = integrate_family(coords, base, support, f, tol, k_max, trace, phase);
  Moments m;
  m.evidence = fam.values[0];
  if (!(m.evidence > 0.0) || !std::isfinite(m.evidence))
    throw NumericalError("non-positive evidence estimate (" + std::to_string(m.evidence) + ")");
  m.mean.resize(d);
  for (int i = 0; i < d; ++i) m.mean(i) = fam.values[1 + i] / m.evidence;
  m.cov.resize(d, d);
  int idx = 1 + d;
  for (int i = 0; i < d; ++i)
    for (int k = i; k < d; ++k) {
      m.cov(i, k) = m.cov(k, i) = fam.values[idx++] / m.evidence - m.mean(i) * m.mean(k);
    }
  m.unique_evals = fam.unique_evals;
  m.skipped = fam.skipped;
  return m;
}

namespace {

AdaptiveResult build_potential_surrogate(const MultilevelConfig& config, const LevelSettings& s, bool directional,
                                         const Coordinates& coords, const PointModel& potential_in_theta,
                                         const TraceSink& trace, const std::string& phase, int level) {
  AdaptiveConfig ac;
  ac.tol = s.tol_in;
  ac.k_max = config.interp_cap(coords.weights);
  ac.kind = OperatorKind::Interp;
  if (directional) ac.directional_tols = s.tau_in;
  BatchModel model = parallel_pointwise([&](std::span<const double> zeta) {
    const auto theta = coords.to_theta(zeta);
    return potential_in_theta(theta);
  });
  const auto obs = make_observer(trace, phase, level);
  return directional ? run_directional(ac, model, coords.weights, obs) : run_standard(ac, model, coords.weights, obs);
}

std::function<bool(std::span<const double>)> support_of(const BayesProblem& problem) {
  return [&problem](std::span<const double> t) { return problem.in_prior_support(t); };
}

}  // namespace

LevelOutcome level1(const BayesProblem& problem, const MultilevelConfig& config, const TraceSink& trace) {
  config.validate(problem.dim());
  const auto t0 = std::chrono::steady_clock::now();
  const LevelSettings& s = config.levels[0];
  const Coordinates coords = Coordinates::identity(problem.prior());

  auto ad = build_potential_surrogate(
      config, s, config.variant == Variant::MLLejaDV, coords,
      [&](std::span<const double> theta) { return problem.potential(theta, s.mesh_level); }, trace, "interp", 1);
  auto phi = std::make_shared<const SparseSurrogate>(std::move(ad.surrogate));

  auto base = [&](std::span<const double> theta) { return std::exp(-phi->evaluate(coords.to_reference(theta))); };
  const Moments mom =
      posterior_moments(coords, base, support_of(problem), s.tol_qu, config.quad_cap(coords.weights), trace, "moments");

  auto level = std::make_shared<PosteriorLevel>();
  level->level = 1;
  level->phi = phi;
  level->coords = coords;
  level->evidence = mom.evidence;
  level->prior = problem.prior();
  level->mean = mom.mean;
  level->cov = mom.cov;
  level->gauss = std::make_shared<const GaussianDensity>(gaussian_from_moments(mom.mean, mom.cov));

  LevelCost cost;
  cost.level = 1;
  cost.mesh_level = s.mesh_level;
  cost.interp_nodes = phi->cached_count();
  cost.forward_by_mesh[s.mesh_level] = phi->cached_count();
  cost.quad_evals = mom.unique_evals;
  cost.quad_skipped = mom.skipped;
  cost.evidence = mom.evidence;
  cost.mean = mom.mean;
  cost.cov = mom.cov;
  cost.tol_in = s.tol_in;
  cost.tol_qu = s.tol_qu;
  cost.interp_stop = ad.state.stop_reason;
  cost.wall_time_s = seconds_since(t0);
  return {level, cost};
}

namespace {

// Reference coordinates and the prior-correction factor pi_parent / weight
// used to integrate against the parent posterior.
struct UpdateFrame {
  Coordinates coords;
  std::function<double(std::span<const double>)> ratio;
};

UpdateFrame frame_for(std::shared_ptr<const PosteriorLevel> parent) {
  if (parent->separable()) {
    const auto prior = parent->prior;
    return {Coordinates::identity(prior), [parent, prior](std::span<const double> theta) {
              double lp = 0.0;
              for (std::size_t i = 0; i < prior.size(); ++i) lp += log_density(prior[i], theta[i]);
              return std::exp(parent->log_density(theta) - lp);
            }};
  }
  return {Coordinates::from_gaussian(*parent->gauss), bias_ratio(parent)};
}

}  // namespace

LevelOutcome level_update(std::shared_ptr<const PosteriorLevel> parent, const BayesProblem& problem,
                          const MultilevelConfig& config, int j, const TraceSink& trace) {
  config.validate(problem.dim());
  if (j < 2 || j > config.J()) throw std::domain_error("level index out of range");
  const auto t0 = std::chrono::steady_clock::now();
  const LevelSettings& s = config.levels[j - 1];
  const int coarse_mesh = config.levels[j - 2].mesh_level;
  const UpdateFrame frame = frame_for(parent);
  const Coordinates& coords = frame.coords;

  std::atomic<std::size_t> oos{0};
  auto ad = build_potential_surrogate(
      config, s, config.variant == Variant::MLLejaDV, coords,
      [&](std::span<const double> theta) {
        // Nodes outside the prior support are still solved: the surrogate
        // needs finite data there. Their likelihood is zeroed downstream.
        if (!problem.in_prior_support(theta)) ++oos;
        return problem.potential(theta, s.mesh_level) - problem.potential(theta, coarse_mesh);
      },
      trace, "interp", j);
  auto phi = std::make_shared<const SparseSurrogate>(std::move(ad.surrogate));

  auto base = [&](std::span<const double> theta) {
    const double r = frame.ratio(theta);
    if (r == 0.0) return 0.0;
    return std::exp(-phi->evaluate(coords.to_reference(theta))) * r;
  };
  const Moments mom =
      posterior_moments(coords, base, support_of(problem), s.tol_qu, config.quad_cap(coords.weights), trace, "moments");

  auto level = std::make_shared<PosteriorLevel>();
  level->level = j;
  level->parent = parent;
  level->phi = phi;
  level->coords = coords;
  level->evidence = mom.evidence;
  level->prior = problem.prior();
  level->mean = mom.mean;
  level->cov = mom.cov;
  level->gauss = std::make_shared<const GaussianDensity>(gaussian_from_moments(mom.mean, mom.cov));

  LevelCost cost;
  cost.level = j;
  cost.mesh_level = s.mesh_level;
  cost.interp_nodes = phi->cached_count();
  cost.forward_by_mesh[s.mesh_level] = phi->cached_count();
  cost.forward_by_mesh[coarse_mesh] += phi->cached_count();
  cost.interp_out_of_support = oos.load();
  cost.quad_evals = mom.unique_evals;
  cost.quad_skipped = mom.skipped;
  cost.evidence = mom.evidence;
  cost.mean = mom.mean;
  cost.cov = mom.cov;
  cost.tol_in = s.tol_in;
  cost.tol_qu = s.tol_qu;
  cost.interp_stop = ad.state.stop_reason;
  cost.wall_time_s = seconds_since(t0);
  return {level, cost};
}

namespace {

std::vector<std::function<double(std::span<const double>)>> component_factors(const Qoi& qoi, int qoi_dim) {
  std::vector<std::function<double(std::span<const double>)>> f;
  for (int q = 0; q < qoi_dim; ++q)
    f.push_back([&qoi, q](std::span<const double> t) {
      const auto v = qoi(t);
      if (static_cast<int>(v.size()) <= q) throw std::domain_error("QoI returned too few components");
      return v[q];
    });
  return f;
}

}  // namespace

MultilevelResult run_multilevel(const BayesProblem& problem, const MultilevelConfig& config, const Qoi& qoi,
                                int qoi_dim, const TraceSink& trace) {
  if (config.variant == Variant::StdML) throw std::domain_error("use run_stdml for the prior-weighted baseline");
  MultilevelResult res;
  LevelOutcome cur = level1(problem, config, trace);
  res.ledger.levels.push_back(cur.cost);
  for (int j = 2; j <= config.J(); ++j) {
    cur = level_update(cur.posterior, problem, config, j, trace);
    res.ledger.levels.push_back(cur.cost);
  }
  res.posterior = cur.posterior;
  const UpdateFrame frame = frame_for(res.posterior);
  const IntegralFamily fam = integrate_family(frame.coords, frame.ratio, support_of(problem),
                                              component_factors(qoi, qoi_dim), config.levels.back().tol_qu,
                                              config.quad_cap(frame.coords.weights), trace, "qoi");
  res.qoi = fam.values;
  res.ledger.final_quad_evals = fam.unique_evals;
  return res;
}

StdMLResult run_stdml(const BayesProblem& problem, const MultilevelConfig& config, const Qoi& qoi, int qoi_dim,
                      const TraceSink& trace) {
  config.validate(problem.dim());
  StdMLResult res;
  const Coordinates coords = Coordinates::identity(problem.prior());
  for (int j = 1; j <= config.J(); ++j) {
    const auto t0 = std::chrono::steady_clock::now();
    const LevelSettings& s = config.levels[j - 1];
    auto ad = build_potential_surrogate(
        config, s, false, coords, [&](std::span<const double> theta) { return problem.potential(theta, s.mesh_level); },
        trace, "interp", j);
    const SparseSurrogate& phi = ad.surrogate;
    auto base = [&](std::span<const double> theta) { return std::exp(-phi.evaluate(coords.to_reference(theta))); };
    auto factors = component_factors(qoi, qoi_dim);
    factors.insert(factors.begin(), [](std::span<const double>) { return 1.0; });
    const IntegralFamily fam =
        integrate_family(coords, base, support_of(problem), factors, s.tol_qu, config.quad_cap(coords.weights), trace, "qoi");
    const double z = fam.values[0];
    if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("non-positive evidence estimate");
    std::vector<double> ij(qoi_dim);
    for (int q = 0; q < qoi_dim; ++q) ij[q] = fam.values[1 + q] / z;
    res.per_level.push_back(ij);

    LevelCost cost;
    cost.level = j;
    cost.mesh_level = s.mesh_level;
    cost.interp_nodes = phi.cached_count();
    cost.forward_by_mesh[s.mesh_level] = phi.cached_count();
    cost.quad_evals = fam.unique_evals;
    cost.quad_skipped = fam.skipped;
    cost.evidence = z;
    cost.mean = Eigen::Map<const Eigen::VectorXd>(ij.data(), qoi_dim);
    cost.tol_in = s.tol_in;
    cost.tol_qu = s.tol_qu;
    cost.interp_stop = ad.state.stop_reason;
    cost.wall_time_s = seconds_since(t0);
    res.ledger.levels.push_back(cost);
  }
  res.qoi = res.per_level[0];
  for (std::size_t j = 1; j < res.per_level.size(); ++j)
    for (int q = 0; q < qoi_dim; ++q) res.qoi[q] += res.per_level[j][q] - res.per_level[j - 1][q];
  return res;
}

DirectQuadResult prior_weighted_quadrature(const BayesProblem& problem, int mesh_level, const Qoi& qoi, int qoi_dim,
                                           double tol, int k_max, const TraceSink& trace) {
  const Coordinates coords = Coordinates::identity(problem.prior());
  auto base = [&](std::span<const double> theta) { return std::exp(-problem.potential(theta, mesh_level)); };
  auto factors = component_factors(qoi, qoi_dim);
  factors.insert(factors.begin(), [](std::span<const double>) { return 1.0; });
  const IntegralFamily fam = integrate_family(coords, base, support_of(problem), factors, tol, k_max, trace, "prior");
  DirectQuadResult r;
  r.evidence = fam.values[0];
  if (!(r.evidence > 0.0)) throw NumericalError("non-positive evidence estimate");
  for (int q = 0; q < qoi_dim; ++q) r.qoi.push_back(fam.values[1 + q] / r.evidence);
  r.nodes = fam.unique_evals;
  return r;
}

DirectQuadResult posterior_weighted_quadrature(const BayesProblem& problem, int mesh_level, const Qoi& qoi,
                                               int qoi_dim, double setup_tol, double tol, int setup_k_max, int k_max,
                                               const TraceSink& trace) {
  const Coordinates prior_coords = Coordinates::identity(problem.prior());
  auto lik = [&](std::span<const double> theta) { return std::exp(-problem.potential(theta, mesh_level)); };
  const Moments mom = posterior_moments(prior_coords, lik, support_of(problem), setup_tol, setup_k_max, trace, "setup");
  const GaussianDensity g = gaussian_from_moments(mom.mean, mom.cov);
  const Coordinates coords = Coordinates::from_gaussian(g);
  const double log_z = std::log(mom.evidence);
  auto ratio = [&](std::span<const double> theta) {
    const double lp = problem.log_prior(theta) - problem.potential(theta, mesh_level) - log_z - g.log_density(theta);
    return std::exp(std::min(lp, std::log(kBiasRatioCap)));
  };
  const IntegralFamily fam =
      integrate_family(coords, ratio, support_of(problem), component_factors(qoi, qoi_dim), tol, k_max, trace, "posterior");
  DirectQuadResult r;
  r.qoi = fam.values;
  r.evidence = mom.evidence;
  r.nodes = fam.unique_evals;
  r.setup_nodes = mom.unique_evals;
  r.mean = mom.mean;
  r.cov = mom.cov;
  return r;
}

}  // namespace mlleja
