#include "mlleja/multi_index.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mlleja {

MultiIndex::MultiIndex(std::vector<int> components) : k_(std::move(components)) {
  for (int c : k_)
    if (c < 1) throw std::domain_error("multi-index components must be >= 1");
}

int MultiIndex::max_component() const { return k_.empty() ? 0 : *std::max_element(k_.begin(), k_.end()); }

int MultiIndex::sum() const { return std::accumulate(k_.begin(), k_.end(), 0); }

bool MultiIndex::is_root() const {
  return std::all_of(k_.begin(), k_.end(), [](int c) { return c == 1; });
}

MultiIndex MultiIndex::forward(int i) const {
  if (i < 0 || i >= dim()) throw std::domain_error("direction out of range");
  MultiIndex r = *this;
  ++r.k_[i];
  return r;
}

bool MultiIndex::minus_mask(unsigned mask, MultiIndex& out) const {
  out = *this;
  for (int i = 0; i < dim(); ++i) {
    if (mask & (1u << i)) {
      if (k_[i] == 1) return false;
      --out.k_[i];
    }
  }
  return true;
}

std::string to_string(const MultiIndex& k) {
  std::string s = "(";
  for (int i = 0; i < k.dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(k[i]);
  }
  return s + ")";
}

void MultiIndexSet::insert(const MultiIndex& k) {
  if (k.dim() != dim_) throw std::domain_error("multi-index dimension mismatch");
  indices_.insert(k);
}

int MultiIndexSet::max_component(int i) const {
  int m = 0;
  for (const auto& k : indices_) m = std::max(m, k[i]);
  return m;
}

bool MultiIndexSet::is_admissible() const {
  if (indices_.empty()) return true;
  if (!contains(MultiIndex::root(dim_))) return false;
  for (const auto& k : indices_) {
    for (int i = 0; i < dim_; ++i) {
      MultiIndex b;
      if (k.minus_mask(1u << i, b) && !contains(b)) return false;
    }
  }
  return true;
}

std::vector<MultiIndex> admissible_forward_neighbors(const MultiIndexSet& old_set, const MultiIndex& k) {
  std::vector<MultiIndex> out;
  for (int i = 0; i < k.dim(); ++i) {
    const MultiIndex r = k.forward(i);
    if (old_set.contains(r)) continue;
    bool ok = true;
    for (int q = 0; q < k.dim() && ok; ++q) {
      MultiIndex b;
      if (r.minus_mask(1u << q, b)) ok = old_set.contains(b);
    }
    if (ok) out.push_back(r);
  }
  return out;
}

MultiIndexSet full_box(const MultiIndex& upper) {
  MultiIndexSet set(upper.dim());
  std::vector<int> k(upper.dim(), 1);
  while (true) {
    set.insert(MultiIndex(k));
    int i = upper.dim() - 1;
    while (i >= 0 && k[i] == upper[i]) k[i--] = 1;
    if (i < 0) break;
    ++k[i];
  }
  return set;
}

}  // namespace mlleja
