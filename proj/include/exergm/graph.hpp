#pragma once

#include <array>
#include <cstdint>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace exergm {

inline constexpr int kMaxDirectedNodes = 6;
inline constexpr int kMaxUndirectedNodes = 8;

// Bumped whenever the bit layout of graph indices changes; part of every
// table cache key.
inline constexpr int kCellOrderVersion = 1;

using NodeMask = std::uint8_t;

/// Number of free tie cells: n(n-1) directed, n(n-1)/2 undirected.
int cell_count(int n, bool directed);

/// Throws std::invalid_argument naming the bound when n is not supported.
void check_size(int n, bool directed);

/// Total number of graphs in the support, 2^cells.
std::uint64_t support_size(int n, bool directed);

/// Small labeled graph without self-ties.
///
/// Cell order: directed graphs use row-major order over ordered pairs
/// (i, j), i != j, so row i owns bits [i(n-1), (i+1)(n-1)). Undirected
/// graphs use lexicographic order over pairs i < j. Bit b of the graph
/// index is cell b.
class Graph {
 public:
  Graph(int n, bool directed);

  static Graph from_index(std::uint64_t index, int n, bool directed);
  static Graph from_edges(int n, bool directed,
                          std::span<const std::pair<int, int>> edges);

  int n() const { return n_; }
  bool directed() const { return directed_; }
  int cells() const { return cell_count(n_, directed_); }
  std::uint64_t index() const { return index_; }

  bool has_tie(int i, int j) const;
  int tie_count() const;

  // Out/in neighbourhoods as bit masks; equal for undirected graphs.
  NodeMask out_mask(int i) const { return out_[i]; }
  NodeMask in_mask(int i) const { return in_[i]; }

  /// Ties in cell order; undirected pairs reported with i < j.
  std::vector<std::pair<int, int>> edges() const;

  bool operator==(const Graph& other) const {
    return n_ == other.n_ && directed_ == other.directed_ &&
           index_ == other.index_;
  }

 private:
  friend class GraphDecoder;

  int n_;
  bool directed_;
  std::uint64_t index_ = 0;
  std::array<NodeMask, kMaxUndirectedNodes> out_{};
  std::array<NodeMask, kMaxUndirectedNodes> in_{};
};

/// Bit position of cell (i, j). For undirected graphs the pair is
/// normalized to i < j first.
int cell_of(int n, bool directed, int i, int j);

/// Fast index -> Graph decoding with per-row lookup tables. Cheap to copy;
/// one instance per enumeration thread.
class GraphDecoder {
 public:
  GraphDecoder(int n, bool directed);
  void decode(std::uint64_t index, Graph& out) const;
  Graph decode(std::uint64_t index) const;

  int n() const { return n_; }
  bool directed() const { return directed_; }

 private:
  int n_;
  bool directed_;
  std::array<int, kMaxUndirectedNodes> row_shift_{};
  std::array<int, kMaxUndirectedNodes> row_width_{};
  // expand_[i][chunk] -> out-mask of node i
  std::vector<std::vector<NodeMask>> expand_;
};

/// Half-open range of graph indices.
struct IndexRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

/// Splits [0, total) into `parts` contiguous, disjoint, covering ranges.
std::vector<IndexRange> partition_indices(std::uint64_t total, unsigned parts);

/// Lazily decoded view over a range of the support, in increasing index
/// order. Never materializes the graphs.
class SupportView {
 public:
  class iterator {
   public:
    using value_type = Graph;
    using difference_type = std::ptrdiff_t;

    iterator() : decoder_(nullptr), index_(0), current_(1, true) {}
    iterator(const GraphDecoder* decoder, std::uint64_t index, std::uint64_t last);

    const Graph& operator*() const { return current_; }
    const Graph* operator->() const { return &current_; }
    iterator& operator++();
    void operator++(int) { ++*this; }
    bool operator==(const iterator& other) const { return index_ == other.index_; }

   private:
    const GraphDecoder* decoder_;
    std::uint64_t index_;
    std::uint64_t last_ = 0;
    Graph current_;
  };

  SupportView(int n, bool directed);
  SupportView(int n, bool directed, IndexRange range);

  iterator begin() const;
  iterator end() const;
  std::uint64_t size() const { return range_.last - range_.first; }

 private:
  GraphDecoder decoder_;
  IndexRange range_;
};

inline SupportView enumerate_support(int n, bool directed) {
  return SupportView(n, directed);
}

/// Calls f(const Graph&) for every graph with index in `range`.
template <typename F>
void for_each_graph(const GraphDecoder& decoder, IndexRange range, F&& f) {
  Graph g(decoder.n(), decoder.directed());
  for (std::uint64_t k = range.first; k < range.last; ++k) {
    decoder.decode(k, g);
    f(g);
  }
}

/// Per-node numeric attributes. Categorical attributes are stored as
/// numeric codes.
class AttributeTable {
 public:
  AttributeTable() = default;
  explicit AttributeTable(int n) : n_(n) {}

  int n() const { return n_; }
  void set(const std::string& name, std::vector<double> values);
  bool contains(const std::string& name) const;
  /// Throws std::invalid_argument naming the attribute when absent.
  const std::vector<double>& get(const std::string& name) const;
  const std::map<std::string, std::vector<double>>& values() const { return values_; }

  bool operator==(const AttributeTable&) const = default;

 private:
  int n_ = 0;
  std::map<std::string, std::vector<double>> values_;
};

/// One observed network with its node attributes.
struct Network {
  std::string id;
  Graph graph;
  AttributeTable attributes;
};

using NetworkSample = std::vector<Network>;

}  // namespace exergm
