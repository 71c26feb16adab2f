#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "exergm/graph.hpp"

namespace testing_util {

inline exergm::Graph random_graph(int n, bool directed, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution tie(p);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i != j && tie(rng)) edges.emplace_back(i, j);
    }
  }
  return exergm::Graph::from_edges(n, directed, edges);
}

inline exergm::Graph complete_graph(int n, bool directed) {
  return exergm::Graph::from_index((std::uint64_t{1} << exergm::cell_count(n, directed)) - 1, n,
                                   directed);
}

/// Graph with exactly `ties` ties, the first cells in cell order.
inline exergm::Graph graph_with_ties(int n, bool directed, int ties) {
  return exergm::Graph::from_index((std::uint64_t{1} << ties) - 1, n, directed);
}

inline exergm::Graph graph_of(int n, bool directed, std::vector<std::pair<int, int>> ties) {
  return exergm::Graph::from_edges(n, directed, ties);
}

inline exergm::Network network(std::string id, exergm::Graph g) {
  const int n = g.n();
  return exergm::Network{std::move(id), std::move(g), exergm::AttributeTable(n)};
}

}  // namespace testing_util
