#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mlleja/multi_index.hpp"
#include "mlleja/orthopoly.hpp"
#include "mlleja/univariate.hpp"

namespace mlleja {

enum class OperatorKind { Interp, Quad };

inline Growth growth_for(OperatorKind kind) { return kind == OperatorKind::Interp ? Growth::Interp : Growth::Quad; }

// Exact node identity: per-dimension ordinals packed 8 bits each.
using NodeKey = std::uint64_t;
NodeKey pack_ordinals(std::span<const int> ordinals);
std::vector<int> unpack_ordinals(NodeKey key, int dim);
inline constexpr int kMaxDim = 8;
inline constexpr int kMaxOrdinal = 255;

struct TensorGrid {
  MultiIndex index;
  std::vector<int> counts;  // N_{k_i}
  std::vector<std::size_t> new_point_offsets;

  std::size_t size() const;
  std::vector<int> ordinals(std::size_t flat) const;
  // prod_i (N_{k_i} - N_{k_i - 1})
  std::size_t delta_count() const { return new_point_offsets.size(); }
};

TensorGrid make_tensor_grid(const MultiIndex& k, Growth growth);

// Dense coefficient array over the multidegree box 0 <= p < extents, row-major.
struct CoefficientArray {
  std::vector<int> extents;
  std::vector<double> data;

  std::size_t flat(std::span<const int> p) const;
  double at(std::span<const int> p) const { return data[flat(p)]; }
  std::vector<int> multidegree(std::size_t flat) const;
};

// Contract a row-major tensor with one vector per dimension.
double contract(std::span<const double> values, std::span<const int> extents,
                const std::vector<std::span<const double>>& factors);

// Tensor-product Lagrange interpolant of `values` on grid k.
double tensor_interpolate(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                          std::span<const double> values, std::span<const double> theta);
double tensor_quadrature(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                         std::span<const double> values);

// Coefficients gamma with sum_p gamma_p Psi_p(theta_n) = values_n on the tensor
// grid. Solved axis by axis with one LU per dimension.
CoefficientArray spectral_coefficients(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                                       std::span<const double> values);
// Same system assembled as one dense Kronecker matrix; reference route for tests.
CoefficientArray spectral_coefficients_dense(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                                             std::span<const double> values);

double surplus_l2_norm(const CoefficientArray& delta_gamma);

// Per-dimension totals sum_{m != 0, m_i != 0} coef_m^2 aggregated over arrays.
std::vector<double> directional_variance_surpluses(std::span<const CoefficientArray* const> arrays);

struct VarianceDecomposition {
  double constant = 0.0;             // m = 0
  std::vector<double> pure;          // only m_i != 0
  double interaction = 0.0;          // two or more nonzero components
  std::vector<double> total;         // m != 0, m_i != 0
};
VarianceDecomposition variance_decomposition(std::span<const CoefficientArray* const> arrays);

class SparseSurrogate {
 public:
  SparseSurrogate(std::vector<WeightKind> weights, OperatorKind kind, int max_level);

  int dim() const { return static_cast<int>(weights_.size()); }
  OperatorKind kind() const { return kind_; }
  Growth growth() const { return growth_for(kind_); }
  int max_level() const { return max_level_; }
  const std::vector<WeightKind>& weights() const { return weights_; }
  std::span<const LejaRule1D> rules() const { return rules_; }
  const MultiIndexSet& index_set() const { return set_; }

  // --- model values ---
  std::vector<double> node_point(std::span<const int> ordinals) const;
  // Grid points of k without a cached value (ordinal tuples).
  std::vector<std::vector<int>> pending_nodes(const MultiIndex& k) const;
  void store_value(std::span<const int> ordinals, double value);
  std::optional<double> cached_value(std::span<const int> ordinals) const;
  std::size_t cached_count() const { return cache_.size(); }
  const std::unordered_map<NodeKey, double>& value_cache() const { return cache_; }

  // Adds k; every backward neighbour must already be present and all grid
  // values of k cached.
  void add_index(const MultiIndex& k);

  // --- per-index quantities (k must be in the set) ---
  const CoefficientArray& spectral(const MultiIndex& k) const;
  const CoefficientArray& surplus_coefficients(const MultiIndex& k) const;
  double quad_surplus(const MultiIndex& k) const;
  double tensor_value(const MultiIndex& k, std::span<const double> theta) const;
  double tensor_quad(const MultiIndex& k) const;
  // Delta_k at theta (Interp) or the scalar quadrature surplus (Quad).
  double surplus_apply(const MultiIndex& k, std::span<const double> theta) const;
  double surplus_norm(const MultiIndex& k) const;
  std::size_t delta_count(const MultiIndex& k) const;
  const std::map<MultiIndex, int>& combination_coefficients() const { return comb_; }

  // --- whole-surrogate queries ---
  double evaluate(std::span<const double> theta) const;
  // Sum of spectral surpluses; equals evaluate() by linearity.
  double evaluate_spectral(std::span<const double> theta) const;
  double integrate() const;

  nlohmann::json to_json() const;
  static SparseSurrogate from_json(const nlohmann::json& doc);

 private:
  struct IndexData {
    TensorGrid grid;
    std::vector<double> values;
    CoefficientArray gamma;
    CoefficientArray delta_gamma;
    double quad = 0.0;
    double quad_delta = 0.0;
  };
  const IndexData& data(const MultiIndex& k) const;

  std::vector<WeightKind> weights_;
  OperatorKind kind_;
  int max_level_;
  std::vector<LejaRule1D> rules_;
  std::vector<OrthoBasis1D> bases_;
  MultiIndexSet set_;
  std::map<MultiIndex, IndexData> data_;
  std::map<MultiIndex, int> comb_;
  std::unordered_map<NodeKey, double> cache_;
};

}  // namespace mlleja
