#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "exergm/graph.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace exergm;

TEST_CASE("from_edges builds the expected graphs") {
  const Graph empty = Graph::from_edges(3, true, {});
  CHECK(empty.tie_count() == 0);

  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) all.emplace_back(i, j);
  const Graph full = Graph::from_edges(3, true, all);
  CHECK(full.tie_count() == 6);
  CHECK(full.index() == 63);

  const std::vector<std::pair<int, int>> dyad{{0, 1}, {1, 0}};
  const Graph g = Graph::from_edges(4, true, dyad);
  CHECK(g.has_tie(0, 1));
  CHECK(g.has_tie(1, 0));
  CHECK_FALSE(g.has_tie(0, 2));
  CHECK(g.tie_count() == 2);
}

TEST_CASE("from_edges rejects bad ties and sizes") {
  const std::vector<std::pair<int, int>> self{{1, 1}};
  CHECK_THROWS_AS(Graph::from_edges(3, true, self), std::invalid_argument);
  const std::vector<std::pair<int, int>> out{{0, 3}};
  CHECK_THROWS_AS(Graph::from_edges(3, true, out), std::invalid_argument);
  CHECK_THROWS_WITH_AS(Graph(7, true), doctest::Contains("1..6"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(Graph(9, false), doctest::Contains("1..8"), std::invalid_argument);
  CHECK_NOTHROW(Graph(8, false));
}

TEST_CASE("decode: zero word, all-ones word, distinctness") {
  const GraphDecoder d(3, true);
  CHECK(d.decode(0).tie_count() == 0);
  CHECK(d.decode(63).tie_count() == 6);
  std::set<std::vector<std::pair<int, int>>> seen;
  for (std::uint64_t k = 0; k < 64; ++k) seen.insert(d.decode(k).edges());
  CHECK(seen.size() == 64);
  CHECK_THROWS_AS(d.decode(64), std::out_of_range);
}

TEST_CASE("support sizes") {
  CHECK(support_size(4, true) == 4096);
  CHECK(support_size(5, true) == 1048576);
  CHECK(support_size(8, false) == 268435456);
  CHECK(support_size(6, true) == (std::uint64_t{1} << 30));
  for (int n = 1; n <= kMaxDirectedNodes; ++n) {
    CHECK(support_size(n, true) == std::uint64_t{1} << (n * (n - 1)));
  }
  for (int n = 1; n <= kMaxUndirectedNodes; ++n) {
    CHECK(support_size(n, false) == std::uint64_t{1} << (n * (n - 1) / 2));
  }
}

TEST_CASE("cell order matches the documented layout") {
  for (bool directed : {true, false}) {
    const int n = 4;
    const GraphDecoder d(n, directed);
    for (std::uint64_t k = 0; k < support_size(n, directed); ++k) {
      const auto a = oracle::decode(k, n, directed);
      const Graph g = d.decode(k);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) REQUIRE(g.has_tie(i, j) == (a[i][j] == 1));
    }
  }
}

TEST_CASE("encode/decode bijection on random inputs") {
  std::mt19937_64 rng(11);
  for (bool directed : {true, false}) {
    for (int n : {2, 3, 5, 6}) {
      const GraphDecoder d(n, directed);
      std::uniform_int_distribution<std::uint64_t> pick(0, support_size(n, directed) - 1);
      for (int rep = 0; rep < 200; ++rep) {
        const std::uint64_t k = pick(rng);
        CHECK(Graph::from_edges(n, directed, d.decode(k).edges()).index() == k);
        const Graph g = testing_util::random_graph(n, directed, rng);
        CHECK(d.decode(g.index()) == g);
      }
    }
  }
}

TEST_CASE("neighbour masks agree with has_tie") {
  std::mt19937_64 rng(5);
  for (bool directed : {true, false}) {
    const Graph g = testing_util::random_graph(6, directed, rng);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        CHECK(((g.out_mask(i) >> j) & 1) == (g.has_tie(i, j) ? 1 : 0));
        CHECK(((g.in_mask(j) >> i) & 1) == (g.has_tie(i, j) ? 1 : 0));
      }
    }
  }
}

TEST_CASE("partitioned enumeration equals serial enumeration") {
  std::vector<std::uint64_t> serial;
  for (const Graph& g : enumerate_support(4, true)) serial.push_back(g.index());
  CHECK(serial.size() == 4096);
  for (unsigned parts : {1u, 3u, 7u, 64u}) {
    std::vector<std::uint64_t> joined;
    for (const auto& r : partition_indices(4096, parts)) {
      for (const Graph& g : SupportView(4, true, r)) joined.push_back(g.index());
    }
    CHECK(joined == serial);
  }
  const auto ranges = partition_indices(10, 4);
  CHECK(ranges.front().first == 0);
  CHECK(ranges.back().last == 10);
}

TEST_CASE("undirected graphs are symmetric") {
  const std::vector<std::pair<int, int>> e{{2, 0}};
  const Graph g = Graph::from_edges(3, false, e);
  CHECK(g.has_tie(0, 2));
  CHECK(g.has_tie(2, 0));
  CHECK(g.tie_count() == 1);
  CHECK(g.edges() == std::vector<std::pair<int, int>>{{0, 2}});
}

TEST_CASE("attribute table") {
  AttributeTable a(3);
  a.set("x", {1, 2, 3});
  CHECK(a.contains("x"));
  CHECK(a.get("x")[2] == 3);
  CHECK_THROWS_WITH_AS(a.get("y"), doctest::Contains("'y'"), std::invalid_argument);
  CHECK_THROWS(a.set("z", {1, 2}));
}
