#include "exergm/graph.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace exergm {

int cell_count(int n, bool directed) {
  return directed ? n * (n - 1) : n * (n - 1) / 2;
}

void check_size(int n, bool directed) {
  const int bound = directed ? kMaxDirectedNodes : kMaxUndirectedNodes;
  if (n < 1 || n > bound) {
    throw std::invalid_argument(
        "network size " + std::to_string(n) + " out of range: " +
        (directed ? "directed" : "undirected") + " graphs support 1.." +
        std::to_string(bound) + " nodes");
  }
}

std::uint64_t support_size(int n, bool directed) {
  check_size(n, directed);
  return std::uint64_t{1} << cell_count(n, directed);
}

int cell_of(int n, bool directed, int i, int j) {
  if (directed) return i * (n - 1) + (j < i ? j : j - 1);
  if (i > j) std::swap(i, j);
  // pairs (a, b), a < i precede row i: sum_{a<i} (n-1-a)
  return i * (n - 1) - i * (i - 1) / 2 + (j - i - 1);
}

Graph::Graph(int n, bool directed) : n_(n), directed_(directed) {
  check_size(n, directed);
}

Graph Graph::from_index(std::uint64_t index, int n, bool directed) {
  return GraphDecoder(n, directed).decode(index);
}

Graph Graph::from_edges(int n, bool directed,
                        std::span<const std::pair<int, int>> edges) {
  check_size(n, directed);
  std::uint64_t index = 0;
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw std::invalid_argument("tie (" + std::to_string(i) + ", " +
                                  std::to_string(j) +
                                  ") has a node index outside 0.." +
                                  std::to_string(n - 1));
    }
    if (i == j) {
      throw std::invalid_argument("self-tie (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") is not allowed");
    }
    index |= std::uint64_t{1} << cell_of(n, directed, i, j);
  }
  return GraphDecoder(n, directed).decode(index);
}

bool Graph::has_tie(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw std::out_of_range("node index out of range");
  }
  return (out_[i] >> j) & 1;
}

int Graph::tie_count() const { return std::popcount(index_); }

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(tie_count());
  for (int i = 0; i < n_; ++i) {
    for (int j = directed_ ? 0 : i + 1; j < n_; ++j) {
      if (i != j && has_tie(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

GraphDecoder::GraphDecoder(int n, bool directed) : n_(n), directed_(directed) {
  check_size(n, directed);
  expand_.resize(n);
  int shift = 0;
  for (int i = 0; i < n; ++i) {
    const int width = directed ? n - 1 : n - 1 - i;
    row_shift_[i] = shift;
    row_width_[i] = width;
    shift += width;
    expand_[i].resize(std::size_t{1} << width);
    for (unsigned chunk = 0; chunk < expand_[i].size(); ++chunk) {
      NodeMask mask = 0;
      for (int t = 0; t < width; ++t) {
        if (!((chunk >> t) & 1u)) continue;
        const int j = directed ? (t < i ? t : t + 1) : i + 1 + t;
        mask |= NodeMask(1u << j);
      }
      expand_[i][chunk] = mask;
    }
  }
}

void GraphDecoder::decode(std::uint64_t index, Graph& g) const {
  if (index >> cell_count(n_, directed_)) {
    throw std::out_of_range("graph index " + std::to_string(index) +
                            " outside the support of size 2^" +
                            std::to_string(cell_count(n_, directed_)));
  }
  g.n_ = n_;
  g.directed_ = directed_;
  g.index_ = index;
  g.out_.fill(0);
  g.in_.fill(0);
  for (int i = 0; i < n_; ++i) {
    const auto chunk = (index >> row_shift_[i]) & ((std::uint64_t{1} << row_width_[i]) - 1);
    g.out_[i] |= expand_[i][chunk];
  }
  if (directed_) {
    for (int i = 0; i < n_; ++i) {
      for (NodeMask m = g.out_[i]; m; m &= NodeMask(m - 1)) {
        g.in_[std::countr_zero(m)] |= NodeMask(1u << i);
      }
    }
  } else {
    // Upper-triangle rows decoded above; mirror them.
    for (int i = 0; i < n_; ++i) {
      for (NodeMask m = NodeMask(g.out_[i] >> (i + 1) << (i + 1)); m; m &= NodeMask(m - 1)) {
        g.out_[std::countr_zero(m)] |= NodeMask(1u << i);
      }
    }
    g.in_ = g.out_;
  }
}

Graph GraphDecoder::decode(std::uint64_t index) const {
  Graph g(n_, directed_);
  decode(index, g);
  return g;
}

std::vector<IndexRange> partition_indices(std::uint64_t total, unsigned parts) {
  if (parts == 0) parts = 1;
  std::vector<IndexRange> out;
  out.reserve(parts);
  const std::uint64_t base = total / parts;
  const std::uint64_t extra = total % parts;
  std::uint64_t first = 0;
  for (unsigned p = 0; p < parts; ++p) {
    const std::uint64_t len = base + (p < extra ? 1 : 0);
    out.push_back({first, first + len});
    first += len;
  }
  return out;
}

SupportView::iterator::iterator(const GraphDecoder* decoder, std::uint64_t index,
                                std::uint64_t last)
    : decoder_(decoder), index_(index), last_(last),
      current_(decoder->n(), decoder->directed()) {
  if (index_ < last_) decoder_->decode(index_, current_);
}

SupportView::iterator& SupportView::iterator::operator++() {
  if (++index_ < last_) decoder_->decode(index_, current_);
  return *this;
}

SupportView::SupportView(int n, bool directed)
    : decoder_(n, directed), range_{0, support_size(n, directed)} {}

SupportView::SupportView(int n, bool directed, IndexRange range)
    : decoder_(n, directed), range_(range) {
  if (range.first > range.last || range.last > support_size(n, directed)) {
    throw std::out_of_range("index range outside the support");
  }
}

SupportView::iterator SupportView::begin() const {
  return iterator(&decoder_, range_.first, range_.last);
}

SupportView::iterator SupportView::end() const {
  return iterator(&decoder_, range_.last, range_.last);
}

void AttributeTable::set(const std::string& name, std::vector<double> values) {
  if (name.empty()) throw std::invalid_argument("attribute name is empty");
  if (static_cast<int>(values.size()) != n_) {
    throw std::invalid_argument("attribute '" + name + "' has " +
                                std::to_string(values.size()) +
                                " values, expected " + std::to_string(n_));
  }
  values_[name] = std::move(values);
}

bool AttributeTable::contains(const std::string& name) const {
  return values_.count(name) != 0;
}

const std::vector<double>& AttributeTable::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) {
    throw std::invalid_argument("attribute '" + name + "' not found");
  }
  return it->second;
}

}  // namespace exergm
