#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "mlleja/sparse.hpp"

namespace testing_support {

using Fn = std::function<double(std::span<const double>)>;

// Builds a surrogate over an admissible set, counting model calls.
inline mlleja::SparseSurrogate build(std::vector<mlleja::WeightKind> weights, mlleja::OperatorKind kind,
                                     const mlleja::MultiIndexSet& set, const Fn& f, int max_level = 12,
                                     std::size_t* calls = nullptr) {
  mlleja::SparseSurrogate s(std::move(weights), kind, max_level);
  std::vector<mlleja::MultiIndex> order(set.begin(), set.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.sum() < b.sum(); });
  for (const auto& k : order) {
    for (const auto& ord : s.pending_nodes(k)) {
      s.store_value(ord, f(s.node_point(ord)));
      if (calls) ++*calls;
    }
    s.add_index(k);
  }
  return s;
}

inline mlleja::MultiIndexSet set_of(int dim, std::initializer_list<std::vector<int>> ks) {
  mlleja::MultiIndexSet s(dim);
  for (const auto& k : ks) s.insert(mlleja::MultiIndex(k));
  return s;
}

}  // namespace testing_support
