#include "mlleja/sparse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "mlleja/error.hpp"

namespace mlleja {

NodeKey pack_ordinals(std::span<const int> ordinals) {
  if (ordinals.size() > static_cast<std::size_t>(kMaxDim)) throw std::domain_error("dimension exceeds node key capacity");
  NodeKey key = 0;
  for (std::size_t i = 0; i < ordinals.size(); ++i) {
    if (ordinals[i] < 0 || ordinals[i] > kMaxOrdinal) throw std::domain_error("node ordinal exceeds key capacity");
    key |= static_cast<NodeKey>(ordinals[i]) << (8 * i);
  }
  return key;
}

std::vector<int> unpack_ordinals(NodeKey key, int dim) {
  std::vector<int> o(dim);
  for (int i = 0; i < dim; ++i) o[i] = static_cast<int>((key >> (8 * i)) & 0xFF);
  return o;
}

std::size_t TensorGrid::size() const {
  std::size_t n = 1;
  for (int c : counts) n *= static_cast<std::size_t>(c);
  return n;
}

std::vector<int> TensorGrid::ordinals(std::size_t flat) const {
  std::vector<int> o(counts.size());
  for (int i = static_cast<int>(counts.size()) - 1; i >= 0; --i) {
    o[i] = static_cast<int>(flat % counts[i]);
    flat /= counts[i];
  }
  return o;
}

TensorGrid make_tensor_grid(const MultiIndex& k, Growth growth) {
  TensorGrid g;
  g.index = k;
  std::vector<int> prev(k.dim());
  for (int i = 0; i < k.dim(); ++i) {
    g.counts.push_back(level_size(growth, k[i]));
    prev[i] = level_size(growth, k[i] - 1);
  }
  const std::size_t n = g.size();
  for (std::size_t f = 0; f < n; ++f) {
    const auto o = g.ordinals(f);
    bool fresh = true;
    for (int i = 0; i < k.dim() && fresh; ++i) fresh = o[i] >= prev[i];
    if (fresh) g.new_point_offsets.push_back(f);
  }
  return g;
}

std::size_t CoefficientArray::flat(std::span<const int> p) const {
  std::size_t f = 0;
  for (std::size_t i = 0; i < extents.size(); ++i) f = f * extents[i] + p[i];
  return f;
}

std::vector<int> CoefficientArray::multidegree(std::size_t f) const {
  std::vector<int> p(extents.size());
  for (int i = static_cast<int>(extents.size()) - 1; i >= 0; --i) {
    p[i] = static_cast<int>(f % extents[i]);
    f /= extents[i];
  }
  return p;
}

double contract(std::span<const double> values, std::span<const int> extents,
                const std::vector<std::span<const double>>& factors) {
  std::vector<double> work(values.begin(), values.end());
  std::size_t len = work.size();
  for (int i = static_cast<int>(extents.size()) - 1; i >= 0; --i) {
    const std::size_t n = static_cast<std::size_t>(extents[i]);
    const std::size_t outer = len / n;
    const auto& f = factors[i];
    for (std::size_t a = 0; a < outer; ++a) {
      double s = 0.0;
      const double* row = work.data() + a * n;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * f[j];
      work[a] = s;
    }
    len = outer;
  }
  return work[0];
}

double tensor_interpolate(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                          std::span<const double> values, std::span<const double> theta) {
  if (values.size() != grid.size()) throw std::logic_error("tensor grid values missing");
  if (theta.size() != grid.counts.size()) throw std::domain_error("dimension mismatch");
  std::vector<std::vector<double>> basis(grid.counts.size());
  std::vector<std::span<const double>> factors;
  for (std::size_t i = 0; i < grid.counts.size(); ++i) {
    basis[i].resize(grid.counts[i]);
    rules[i].lagrange_basis(grid.counts[i], theta[i], basis[i]);
    factors.emplace_back(basis[i]);
  }
  return contract(values, grid.counts, factors);
}

double tensor_quadrature(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                         std::span<const double> values) {
  if (values.size() != grid.size()) throw std::logic_error("tensor grid values missing");
  std::vector<std::span<const double>> factors;
  for (std::size_t i = 0; i < grid.counts.size(); ++i)
    factors.push_back(rules[i].quad_weights_for_count(grid.counts[i]));
  return contract(values, grid.counts, factors);
}

namespace {

// V(n, p) = psi_p(theta_n) for the first `count` nodes of a rule.
Eigen::MatrixXd vandermonde(const LejaRule1D& rule, int count) {
  const OrthoBasis1D basis(rule.kind(), std::max(count - 1, 0));
  Eigen::MatrixXd v(count, count);
  std::vector<double> row(count);
  for (int n = 0; n < count; ++n) {
    basis.eval_all(rule.node(n), row);
    for (int p = 0; p < count; ++p) v(n, p) = row[p];
  }
  return v;
}

}  // namespace

CoefficientArray spectral_coefficients(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                                       std::span<const double> values) {
  if (values.size() != grid.size()) throw std::logic_error("tensor grid values missing");
  CoefficientArray out{grid.counts, {values.begin(), values.end()}};
  const int d = static_cast<int>(grid.counts.size());
  for (int i = 0; i < d; ++i) {
    const int n = grid.counts[i];
    if (n == 1) {
      continue;  // psi_0 = 1 at any node
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(vandermonde(rules[i], n));
    if (!(lu.rcond() > 1e-15)) throw NumericalError("singular spectral system");
    std::size_t stride = 1;
    for (int j = i + 1; j < d; ++j) stride *= grid.counts[j];
    const std::size_t outer = out.data.size() / (stride * n);
    Eigen::VectorXd line(n);
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t b = 0; b < stride; ++b) {
        const std::size_t base = a * n * stride + b;
        for (int m = 0; m < n; ++m) line(m) = out.data[base + m * stride];
        const Eigen::VectorXd sol = lu.solve(line);
        for (int m = 0; m < n; ++m) out.data[base + m * stride] = sol(m);
      }
    }
  }
  return out;
}

CoefficientArray spectral_coefficients_dense(std::span<const LejaRule1D> rules, const TensorGrid& grid,
                                             std::span<const double> values) {
  if (values.size() != grid.size()) throw std::logic_error("tensor grid values missing");
  const int d = static_cast<int>(grid.counts.size());
  std::vector<Eigen::MatrixXd> v;
  for (int i = 0; i < d; ++i) v.push_back(vandermonde(rules[i], grid.counts[i]));
  const std::size_t n = grid.size();
  Eigen::MatrixXd big(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto o = grid.ordinals(r);
    for (std::size_t c = 0; c < n; ++c) {
      const auto p = grid.ordinals(c);
      double prod = 1.0;
      for (int i = 0; i < d; ++i) prod *= v[i](o[i], p[i]);
      big(r, c) = prod;
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(big);
  if (!(lu.rcond() > 1e-15)) throw NumericalError("singular spectral system");
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  const Eigen::VectorXd sol = lu.solve(rhs);
  return {grid.counts, {sol.data(), sol.data() + n}};
}

double surplus_l2_norm(const CoefficientArray& delta_gamma) {
  double s = 0.0;
  for (double c : delta_gamma.data) s += c * c;
  return std::sqrt(s);
}

VarianceDecomposition variance_decomposition(std::span<const CoefficientArray* const> arrays) {
  VarianceDecomposition vd;
  int d = arrays.empty() ? 0 : static_cast<int>(arrays.front()->extents.size());
  vd.pure.assign(d, 0.0);
  vd.total.assign(d, 0.0);
  for (const CoefficientArray* a : arrays) {
    if (static_cast<int>(a->extents.size()) != d) throw std::domain_error("coefficient dimension mismatch");
    for (std::size_t f = 0; f < a->data.size(); ++f) {
      const double c2 = a->data[f] * a->data[f];
      const auto m = a->multidegree(f);
      int nonzero = 0, last = -1;
      for (int i = 0; i < d; ++i)
        if (m[i] != 0) {
          ++nonzero;
          last = i;
          vd.total[i] += c2;
        }
      if (nonzero == 0)
        vd.constant += c2;
      else if (nonzero == 1)
        vd.pure[last] += c2;
      else
        vd.interaction += c2;
    }
  }
  return vd;
}

std::vector<double> directional_variance_surpluses(std::span<const CoefficientArray* const> arrays) {
  return variance_decomposition(arrays).total;
}

// ---------------------------------------------------------------------------

SparseSurrogate::SparseSurrogate(std::vector<WeightKind> weights, OperatorKind kind, int max_level)
    : weights_(std::move(weights)), kind_(kind), max_level_(max_level), set_(static_cast<int>(weights_.size())) {
  if (weights_.empty() || dim() > kMaxDim) throw std::domain_error("unsupported surrogate dimension");
  if (max_level < 1) throw std::domain_error("max_level must be >= 1");
  if (level_size(growth(), max_level) > kMaxOrdinal + 1) throw std::domain_error("max_level exceeds node key capacity");
  for (WeightKind w : weights_) {
    rules_.emplace_back(w, growth(), level_size(growth(), max_level));
    bases_.emplace_back(w, level_size(growth(), max_level));
  }
}

std::vector<double> SparseSurrogate::node_point(std::span<const int> ordinals) const {
  std::vector<double> p(dim());
  for (int i = 0; i < dim(); ++i) p[i] = rules_[i].node(ordinals[i]);
  return p;
}

std::vector<std::vector<int>> SparseSurrogate::pending_nodes(const MultiIndex& k) const {
  if (k.max_component() > max_level_) throw std::domain_error("index exceeds surrogate max_level");
  const TensorGrid grid = make_tensor_grid(k, growth());
  std::vector<std::vector<int>> out;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    auto o = grid.ordinals(f);
    if (!cache_.count(pack_ordinals(o))) out.push_back(std::move(o));
  }
  return out;
}

void SparseSurrogate::store_value(std::span<const int> ordinals, double value) {
  cache_[pack_ordinals(ordinals)] = value;
}

std::optional<double> SparseSurrogate::cached_value(std::span<const int> ordinals) const {
  auto it = cache_.find(pack_ordinals(ordinals));
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

void SparseSurrogate::add_index(const MultiIndex& k) {
  if (k.dim() != dim()) throw std::domain_error("multi-index dimension mismatch");
  if (k.max_component() > max_level_) throw std::domain_error("index exceeds surrogate max_level");
  if (set_.contains(k)) return;
  for (int i = 0; i < dim(); ++i) {
    MultiIndex b;
    if (k.minus_mask(1u << i, b) && !set_.contains(b))
      throw std::logic_error("adding " + to_string(k) + " would break admissibility");
  }
  IndexData d;
  d.grid = make_tensor_grid(k, growth());
  d.values.resize(d.grid.size());
  for (std::size_t f = 0; f < d.grid.size(); ++f) {
    auto it = cache_.find(pack_ordinals(d.grid.ordinals(f)));
    if (it == cache_.end()) throw std::logic_error("missing model value for grid " + to_string(k));
    d.values[f] = it->second;
  }

  const unsigned masks = 1u << dim();
  if (kind_ == OperatorKind::Interp) {
    d.gamma = spectral_coefficients(rules_, d.grid, d.values);
    d.delta_gamma = d.gamma;
    for (unsigned z = 1; z < masks; ++z) {
      MultiIndex km;
      if (!k.minus_mask(z, km)) continue;
      const double sign = (std::popcount(z) % 2) ? -1.0 : 1.0;
      const CoefficientArray& g = data(km).gamma;
      for (std::size_t f = 0; f < g.data.size(); ++f) {
        const auto p = g.multidegree(f);
        d.delta_gamma.data[d.delta_gamma.flat(p)] += sign * g.data[f];
      }
    }
  }
  d.quad = tensor_quadrature(rules_, d.grid, d.values);
  d.quad_delta = d.quad;
  for (unsigned z = 1; z < masks; ++z) {
    MultiIndex km;
    if (!k.minus_mask(z, km)) continue;
    const double sign = (std::popcount(z) % 2) ? -1.0 : 1.0;
    d.quad_delta += sign * data(km).quad;
  }

  for (unsigned z = 0; z < masks; ++z) {
    MultiIndex km;
    if (!k.minus_mask(z, km)) continue;
    const int sign = (std::popcount(z) % 2) ? -1 : 1;
    if ((comb_[km] += sign) == 0) comb_.erase(km);
  }
  data_.emplace(k, std::move(d));
  set_.insert(k);
}

const SparseSurrogate::IndexData& SparseSurrogate::data(const MultiIndex& k) const {
  auto it = data_.find(k);
  if (it == data_.end()) throw std::logic_error("index " + to_string(k) + " not in surrogate");
  return it->second;
}

const CoefficientArray& SparseSurrogate::spectral(const MultiIndex& k) const {
  if (kind_ != OperatorKind::Interp) throw std::logic_error("spectral coefficients need an interpolation surrogate");
  return data(k).gamma;
}

const CoefficientArray& SparseSurrogate::surplus_coefficients(const MultiIndex& k) const {
  if (kind_ != OperatorKind::Interp) throw std::logic_error("spectral coefficients need an interpolation surrogate");
  return data(k).delta_gamma;
}

double SparseSurrogate::quad_surplus(const MultiIndex& k) const { return data(k).quad_delta; }
double SparseSurrogate::tensor_quad(const MultiIndex& k) const { return data(k).quad; }
std::size_t SparseSurrogate::delta_count(const MultiIndex& k) const { return data(k).grid.delta_count(); }

double SparseSurrogate::tensor_value(const MultiIndex& k, std::span<const double> theta) const {
  const IndexData& d = data(k);
  return tensor_interpolate(rules_, d.grid, d.values, theta);
}

double SparseSurrogate::surplus_apply(const MultiIndex& k, std::span<const double> theta) const {
  if (kind_ == OperatorKind::Quad) return quad_surplus(k);
  double s = 0.0;
  for (unsigned z = 0; z < (1u << dim()); ++z) {
    MultiIndex km;
    if (!k.minus_mask(z, km)) continue;
    s += ((std::popcount(z) % 2) ? -1.0 : 1.0) * tensor_value(km, theta);
  }
  return s;
}

double SparseSurrogate::surplus_norm(const MultiIndex& k) const {
  if (kind_ == OperatorKind::Quad) return std::abs(quad_surplus(k));
  return surplus_l2_norm(surplus_coefficients(k));
}

double SparseSurrogate::evaluate(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != dim()) throw std::domain_error("dimension mismatch");
  if (comb_.empty()) return 0.0;
  // Lagrange bases per (dimension, count), shared across tensor grids.
  std::vector<std::vector<std::vector<double>>> basis(dim());
  auto get = [&](int i, int n) -> std::span<const double> {
    auto& slot = basis[i];
    if (static_cast<int>(slot.size()) < n) slot.resize(n);
    auto& b = slot[n - 1];
    if (b.empty()) {
      b.resize(n);
      rules_[i].lagrange_basis(n, theta[i], b);
    }
    return b;
  };
  double s = 0.0;
  std::vector<std::span<const double>> factors(dim());
  for (const auto& [k, c] : comb_) {
    const IndexData& d = data(k);
    for (int i = 0; i < dim(); ++i) factors[i] = get(i, d.grid.counts[i]);
    s += c * contract(d.values, d.grid.counts, factors);
  }
  return s;
}

double SparseSurrogate::evaluate_spectral(std::span<const double> theta) const {
  if (kind_ != OperatorKind::Interp) throw std::logic_error("spectral evaluation needs an interpolation surrogate");
  std::vector<std::vector<double>> psi(dim());
  for (int i = 0; i < dim(); ++i) {
    psi[i].resize(level_size(growth(), max_level_));
    bases_[i].eval_all(theta[i], psi[i]);
  }
  double s = 0.0;
  for (const auto& [k, d] : data_) {
    std::vector<std::span<const double>> factors;
    for (int i = 0; i < dim(); ++i) factors.emplace_back(psi[i].data(), d.delta_gamma.extents[i]);
    s += contract(d.delta_gamma.data, d.delta_gamma.extents, factors);
  }
  return s;
}

double SparseSurrogate::integrate() const {
  double s = 0.0;
  for (const auto& [k, d] : data_) s += d.quad_delta;
  return s;
}

nlohmann::json SparseSurrogate::to_json() const {
  using nlohmann::json;
  json doc;
  doc["kind"] = kind_ == OperatorKind::Interp ? "interp" : "quad";
  doc["growth"] = kind_ == OperatorKind::Interp ? "interp" : "quad";
  doc["max_level"] = max_level_;
  json w = json::array();
  for (WeightKind k : weights_) w.push_back(to_string(k));
  doc["weights"] = w;
  json idx = json::array();
  for (const auto& [k, d] : data_) {
    json e;
    e["index"] = std::vector<int>(k.components().begin(), k.components().end());
    if (kind_ == OperatorKind::Interp) {
      e["extents"] = d.delta_gamma.extents;
      e["delta_gamma"] = d.delta_gamma.data;
    } else {
      e["delta"] = d.quad_delta;
    }
    idx.push_back(e);
  }
  doc["indices"] = idx;
  json nodes = json::array();
  for (const auto& [key, v] : cache_) nodes.push_back({{"ordinals", unpack_ordinals(key, dim())}, {"value", v}});
  doc["nodes"] = nodes;
  return doc;
}

SparseSurrogate SparseSurrogate::from_json(const nlohmann::json& doc) {
  std::vector<WeightKind> w;
  for (const auto& s : doc.at("weights")) w.push_back(weight_kind_from_string(s.get<std::string>()));
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind != "interp" && kind != "quad") throw std::domain_error("unknown surrogate kind '" + kind + "'");
  SparseSurrogate s(w, kind == "interp" ? OperatorKind::Interp : OperatorKind::Quad, doc.at("max_level").get<int>());
  for (const auto& n : doc.at("nodes")) s.store_value(n.at("ordinals").get<std::vector<int>>(), n.at("value").get<double>());
  std::vector<MultiIndex> order;
  for (const auto& e : doc.at("indices")) order.emplace_back(e.at("index").get<std::vector<int>>());
  std::stable_sort(order.begin(), order.end(), [](const MultiIndex& a, const MultiIndex& b) { return a.sum() < b.sum(); });
  for (const auto& k : order) s.add_index(k);
  return s;
}

}  // namespace mlleja
