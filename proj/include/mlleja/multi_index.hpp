#pragma once

#include <compare>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mlleja {

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> components);
  static MultiIndex root(int dim) { return MultiIndex(std::vector<int>(dim, 1)); }

  int dim() const { return static_cast<int>(k_.size()); }
  int operator[](int i) const { return k_[i]; }
  std::span<const int> components() const { return k_; }
  int max_component() const;
  int sum() const;
  bool is_root() const;

  MultiIndex forward(int i) const;
  // k - z for z in {0,1}^d given as a bitmask; false if a component would hit 0.
  bool minus_mask(unsigned mask, MultiIndex& out) const;

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> k_;
};

std::string to_string(const MultiIndex& k);

class MultiIndexSet {
 public:
  explicit MultiIndexSet(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(const MultiIndex& k) const { return indices_.count(k) > 0; }
  void insert(const MultiIndex& k);
  bool erase(const MultiIndex& k) { return indices_.erase(k) > 0; }

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  int max_component(int i) const;
  // Downward closed and containing the root (the empty set is admissible).
  bool is_admissible() const;

 private:
  int dim_;
  std::set<MultiIndex> indices_;
};

// Every k + e_i whose backward neighbours all lie in `old_set`, excluding
// indices already in `old_set`.
std::vector<MultiIndex> admissible_forward_neighbors(const MultiIndexSet& old_set, const MultiIndex& k);

// All indices in the box 1 <= k <= upper.
MultiIndexSet full_box(const MultiIndex& upper);

}  // namespace mlleja
