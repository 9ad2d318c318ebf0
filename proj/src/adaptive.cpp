#include "mlleja/adaptive.hpp"

#include <cmath>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "mlleja/error.hpp"

namespace mlleja {

void AdaptiveConfig::validate(int dim) const {
  if (!(tol > 0.0)) throw std::domain_error("adaptive tolerance must be positive");
  if (k_max < 1) throw std::domain_error("k_max must be >= 1");
  if (directional_tols) {
    if (static_cast<int>(directional_tols->size()) != dim)
      throw std::domain_error("directional tolerance count does not match dimension");
    for (double t : *directional_tols)
      if (!(t > 0.0)) throw std::domain_error("directional tolerances must be positive");
  }
}

namespace {

std::string describe_point(std::span<const double> p) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

BatchModel pointwise(PointModel f, bool parallel) {
  return [f = std::move(f), parallel](const EvaluationBatch& batch, std::span<double> out) {
    const long n = static_cast<long>(batch.size());
    std::exception_ptr failure;
    long failed_at = -1;
    std::string message;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long i = 0; i < n; ++i) {
      try {
        const double v = f(batch.point(i));
        if (!std::isfinite(v)) throw ModelEvaluationError("non-finite model value");
        out[i] = v;
      } catch (const std::exception& e) {
#pragma omp critical(mlleja_model_failure)
        if (failed_at < 0 || i < failed_at) {
          failed_at = i;
          message = e.what();
        }
      }
    }
    if (failed_at >= 0)
      throw ModelEvaluationError("model evaluation failed at node " + describe_point(batch.point(failed_at)) + ": " +
                                 message);
  };
}

void evaluate_pending(SparseSurrogate& s, const std::vector<MultiIndex>& indices, const BatchModel& model) {
  EvaluationBatch batch;
  batch.dim = s.dim();
  std::vector<std::vector<int>> ordinals;
  std::unordered_set<NodeKey> seen;
  for (const auto& k : indices) {
    for (auto& o : s.pending_nodes(k)) {
      const NodeKey key = pack_ordinals(o);
      if (!seen.insert(key).second) continue;
      batch.keys.push_back(key);
      const auto p = s.node_point(o);
      batch.points.insert(batch.points.end(), p.begin(), p.end());
      ordinals.push_back(std::move(o));
    }
  }
  if (batch.size() == 0) return;
  std::vector<double> values(batch.size());
  model(batch, values);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw ModelEvaluationError("model returned a non-finite value at node " + describe_point(batch.point(i)));
    s.store_value(ordinals[i], values[i]);
  }
}

std::vector<double> active_directional_variance(const SparseSurrogate& s, const MultiIndexSet& active) {
  std::vector<const CoefficientArray*> arrays;
  for (const auto& k : active) arrays.push_back(&s.surplus_coefficients(k));
  if (arrays.empty()) return std::vector<double>(s.dim(), 0.0);
  return directional_variance_surpluses(arrays);
}

AdaptiveResult run(const AdaptiveConfig& config, const BatchModel& model, const std::vector<WeightKind>& weights,
                   const StepObserver& observer, bool directional) {
  const int d = static_cast<int>(weights.size());
  config.validate(d);
  if (directional && config.kind != OperatorKind::Interp)
    throw std::domain_error("directional adaptivity applies to interpolation only");
  if (directional && !config.directional_tols) throw std::domain_error("directional adaptivity needs tolerances");

  AdaptiveResult res{SparseSurrogate(weights, config.kind, config.k_max), AdaptiveState{}};
  SparseSurrogate& s = res.surrogate;
  AdaptiveState& st = res.state;
  st.old_set = MultiIndexSet(d);
  st.active_set = MultiIndexSet(d);
  st.frozen.assign(d, false);

  const MultiIndex root = MultiIndex::root(d);
  evaluate_pending(s, {root}, model);
  s.add_index(root);
  const double eps_root = refinement_indicator(s, root);
  st.active_set.insert(root);
  st.indicators[root] = eps_root;
  st.rho = eps_root;
  st.evaluations = s.cached_count();
  if (directional) st.directional_variance = active_directional_variance(s, st.active_set);

  bool force_ring = config.kind == OperatorKind::Quad && eps_root == 0.0;

  while (true) {
    if (st.active_set.empty()) {
      st.stop_reason = "active set empty";
      break;
    }
    if (!force_ring && st.rho < config.tol) {
      st.stop_reason = "tolerance";
      break;
    }
    if (directional && st.steps > 0) {
      bool all_below = true;
      for (int i = 0; i < d; ++i) all_below = all_below && st.directional_variance[i] < (*config.directional_tols)[i];
      if (all_below) {
        st.stop_reason = "directional variance";
        break;
      }
    }

    // Largest indicator; ties resolved to the lexicographically smallest index.
    const MultiIndex* best = nullptr;
    double best_eps = -1.0;
    for (const auto& [k, e] : st.indicators) {
      if (e > best_eps) {
        best_eps = e;
        best = &k;
      }
    }
    const MultiIndex k = *best;

    MultiIndexSet trial_old = st.old_set;
    trial_old.insert(k);
    std::vector<MultiIndex> candidates;
    const MultiIndexSet full = st.full_set();
    for (auto& r : admissible_forward_neighbors(trial_old, k)) {
      if (st.active_set.contains(r)) continue;
      bool suppressed = false;
      for (int i = 0; i < d && !suppressed; ++i)
        suppressed = directional && st.frozen[i] && r[i] > full.max_component(i);
      if (!suppressed) candidates.push_back(r);
    }
    bool exceeds = false;
    for (const auto& r : candidates) exceeds = exceeds || r.max_component() > config.k_max;
    if (exceeds) {
      st.stop_reason = "k_max";
      break;
    }

    st.active_set.erase(k);
    st.indicators.erase(k);
    st.old_set.insert(k);
    st.rho -= best_eps;

    evaluate_pending(s, candidates, model);
    for (const auto& r : candidates) {
      s.add_index(r);
      const double e = refinement_indicator(s, r);
      st.active_set.insert(r);
      st.indicators[r] = e;
      st.rho += e;
    }
    if (st.active_set.empty()) st.rho = 0.0;
    st.evaluations = s.cached_count();
    ++st.steps;
    force_ring = false;

    if (directional) {
      st.directional_variance = active_directional_variance(s, st.active_set);
      for (int i = 0; i < d; ++i) st.frozen[i] = st.directional_variance[i] < (*config.directional_tols)[i];
    }
    if (observer) {
      StepRecord rec{st.steps, k, best_eps, st.rho, st.evaluations, st.directional_variance, candidates};
      observer(rec, s);
    }
  }
  return res;
}

}  // namespace

BatchModel parallel_pointwise(PointModel f) { return pointwise(std::move(f), true); }
BatchModel serial_pointwise(PointModel f) { return pointwise(std::move(f), false); }

MultiIndexSet AdaptiveState::full_set() const {
  MultiIndexSet k = old_set;
  for (const auto& a : active_set) k.insert(a);
  return k;
}

double AdaptiveState::recomputed_rho() const {
  double r = 0.0;
  for (const auto& [k, e] : indicators) r += e;
  return r;
}

double refinement_indicator(const SparseSurrogate& surrogate, const MultiIndex& k) {
  return surrogate.surplus_norm(k) / static_cast<double>(surrogate.delta_count(k));
}

AdaptiveResult run_standard(const AdaptiveConfig& config, const BatchModel& model,
                            const std::vector<WeightKind>& weights, const StepObserver& observer) {
  return run(config, model, weights, observer, false);
}

AdaptiveResult run_directional(const AdaptiveConfig& config, const BatchModel& model,
                               const std::vector<WeightKind>& weights, const StepObserver& observer) {
  return run(config, model, weights, observer, true);
}

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["selected"] = std::vector<int>(r.selected.components().begin(), r.selected.components().end());
  j["indicator"] = r.indicator;
  j["rho"] = r.rho;
  j["evaluations"] = r.evaluations;
  if (!r.directional_variance.empty()) j["directional_variance"] = r.directional_variance;
  nlohmann::json added = nlohmann::json::array();
  for (const auto& k : r.added) added.push_back(std::vector<int>(k.components().begin(), k.components().end()));
  j["added"] = added;
  return j;
}

}  // namespace mlleja
