#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlleja/sparse.hpp"

namespace mlleja {

struct AdaptiveConfig {
  double tol = 1e-6;
  int k_max = 20;
  // Directional tolerances, compared directly against the directional
  // variance surpluses (the entries are already squared tolerances).
  std::optional<std::vector<double>> directional_tols;
  OperatorKind kind = OperatorKind::Interp;

  void validate(int dim) const;
};

// A batch of nodes to evaluate: ordinal keys and flattened coordinates.
struct EvaluationBatch {
  int dim = 0;
  std::vector<NodeKey> keys;
  std::vector<double> points;  // size() * dim

  std::size_t size() const { return keys.size(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, static_cast<std::size_t>(dim)}; }
};

// Fills out[i] with the model value at batch.point(i).
using BatchModel = std::function<void(const EvaluationBatch&, std::span<double>)>;
using PointModel = std::function<double(std::span<const double>)>;

// Evaluate point-wise with an OpenMP parallel loop. Exceptions thrown by the
// model are rethrown as ModelEvaluationError naming the node.
BatchModel parallel_pointwise(PointModel f);
BatchModel serial_pointwise(PointModel f);

struct StepRecord {
  int step = 0;
  MultiIndex selected;
  double indicator = 0.0;
  double rho = 0.0;
  std::size_t evaluations = 0;
  std::vector<double> directional_variance;
  std::vector<MultiIndex> added;
};

using StepObserver = std::function<void(const StepRecord&, const SparseSurrogate&)>;

struct AdaptiveState {
  MultiIndexSet old_set = MultiIndexSet(0);
  MultiIndexSet active_set = MultiIndexSet(0);
  std::map<MultiIndex, double> indicators;  // for k in active_set
  double rho = 0.0;
  std::vector<bool> frozen;
  std::vector<double> directional_variance;
  std::size_t evaluations = 0;
  int steps = 0;
  std::string stop_reason;

  MultiIndexSet full_set() const;
  double recomputed_rho() const;
};

struct AdaptiveResult {
  SparseSurrogate surrogate;
  AdaptiveState state;
};

double refinement_indicator(const SparseSurrogate& surrogate, const MultiIndex& k);

AdaptiveResult run_standard(const AdaptiveConfig& config, const BatchModel& model,
                            const std::vector<WeightKind>& weights, const StepObserver& observer = {});
AdaptiveResult run_directional(const AdaptiveConfig& config, const BatchModel& model,
                               const std::vector<WeightKind>& weights, const StepObserver& observer = {});

nlohmann::json to_json(const StepRecord& record);

}  // namespace mlleja
