#include <doctest.h>

#include <stdexcept>

#include "mlleja/multi_index.hpp"
#include "test_support.hpp"

using namespace mlleja;
using testing_support::set_of;

TEST_SUITE("multi_index") {

TEST_CASE("forward neighbour examples") {
  const auto o1 = set_of(2, {{1, 1}});
  CHECK(admissible_forward_neighbors(o1, MultiIndex({1, 1})) == std::vector{MultiIndex({2, 1}), MultiIndex({1, 2})});
  const auto o2 = set_of(2, {{1, 1}, {2, 1}});
  CHECK(admissible_forward_neighbors(o2, MultiIndex({2, 1})) == std::vector{MultiIndex({3, 1})});
  const auto o3 = set_of(1, {{1}, {2}, {3}});
  CHECK(admissible_forward_neighbors(o3, MultiIndex({3})) == std::vector{MultiIndex({4})});
}

TEST_CASE("neighbours already in the set are excluded") {
  const auto o = set_of(2, {{1, 1}, {2, 1}, {1, 2}, {2, 2}});
  const auto n = admissible_forward_neighbors(o, MultiIndex({1, 2}));
  CHECK(n == std::vector{MultiIndex({1, 3})});
}

TEST_CASE("admissibility") {
  CHECK(MultiIndexSet(2).is_admissible());
  CHECK(set_of(2, {{1, 1}, {2, 1}, {1, 2}, {2, 2}}).is_admissible());
  CHECK_FALSE(set_of(2, {{1, 1}, {2, 2}}).is_admissible());
  CHECK_FALSE(set_of(2, {{2, 1}}).is_admissible());
  const auto box = full_box(MultiIndex({3, 2, 2}));
  CHECK(box.size() == 12);
  CHECK(box.is_admissible());
  CHECK(box.max_component(0) == 3);
}

TEST_CASE("index arithmetic") {
  const MultiIndex k({2, 1, 3});
  CHECK(k.sum() == 6);
  CHECK(k.max_component() == 3);
  CHECK(k.forward(1) == MultiIndex({2, 2, 3}));
  MultiIndex out;
  CHECK(k.minus_mask(0b101, out));
  CHECK(out == MultiIndex({1, 1, 2}));
  CHECK_FALSE(k.minus_mask(0b010, out));
  CHECK(MultiIndex::root(3).is_root());
  CHECK(to_string(k) == "(2,1,3)");
  CHECK_THROWS_AS(MultiIndex({1, 0}), std::domain_error);
  CHECK_THROWS_AS(k.forward(3), std::domain_error);
}

}
