#pragma once

// Brute-force reference implementations. Written from the documented
// conventions only; nothing here calls engine evaluation code. Engine types
// appear purely as plain data (ModelSpec fields, AttributeTable values).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "exergm/graph.hpp"
#include "exergm/terms.hpp"

namespace oracle {

using Adjacency = std::vector<std::vector<int>>;

int cells(int n, bool directed);
/// Bit b of k is the b-th tie cell: directed cells run over (i, j), i != j,
/// row by row; undirected cells over i < j lexicographically.
Adjacency decode(std::uint64_t k, int n, bool directed);
std::uint64_t encode(const Adjacency& a, bool directed);
Adjacency from_graph(const exergm::Graph& g);

struct BaseStats {
  double edges = 0;
  double mutual = 0;
  double ttriad = 0;
  double fourcycle = 0;
  std::map<std::string, double> nodematch;
  std::map<std::string, double> nodeicov;
  std::map<std::string, double> nodeocov;
};

BaseStats oracle_stats(const Adjacency& a, bool directed, const exergm::AttributeTable& attrs);

/// Statistic vector and offset for one graph under `model`.
std::vector<double> model_stats(const exergm::ModelSpec& model, const Adjacency& a,
                                bool directed, const exergm::AttributeTable& attrs);
double model_offset(const exergm::ModelSpec& model, const Adjacency& a, bool directed,
                    const exergm::AttributeTable& attrs);

/// Probability of every graph index in [0, 2^m); n <= 4 directed or the
/// equivalent number of undirected cells.
std::vector<double> oracle_prob(const std::vector<double>& theta, const exergm::ModelSpec& model,
                                const exergm::AttributeTable& attrs, int n, bool directed);

struct LogLik {
  double value = 0;
  std::vector<double> gradient;
};

/// Sum of log P(observed) and of s_obs - E[s] over the networks.
LogLik oracle_loglik(const std::vector<double>& theta, const exergm::ModelSpec& model,
                     const exergm::NetworkSample& sample);

double binomial(int n, int k);

}  // namespace oracle
