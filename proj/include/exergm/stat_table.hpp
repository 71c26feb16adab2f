#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exergm/graph.hpp"
#include "exergm/terms.hpp"

namespace exergm {

struct TableMeta {
  int n = 0;
  bool directed = true;
  std::string formula;         // canonical formula text
  std::string cache_key;       // table_cache_key of the inputs
  std::uint64_t total_graphs = 0;     // 2^m
  std::uint64_t excluded_graphs = 0;  // removed by -inf constraints

  bool operator==(const TableMeta&) const = default;
};

/// Collapsed exact support: distinct (statistics, offset) rows with the
/// number of graphs sharing each row. Rows are sorted lexicographically by
/// statistic vector, then offset. Immutable once built.
class StatTable {
 public:
  StatTable(TableMeta meta, Eigen::MatrixXd q, std::vector<std::uint64_t> weights,
            Eigen::VectorXd offsets);

  const TableMeta& meta() const { return meta_; }
  Eigen::Index rows() const { return q_.rows(); }
  Eigen::Index cols() const { return q_.cols(); }

  /// rows x terms
  const Eigen::MatrixXd& q() const { return q_; }
  const std::vector<std::uint64_t>& weights() const { return weights_; }
  const Eigen::VectorXd& log_weights() const { return log_weights_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }
  std::uint64_t total_weight() const;

  double column_min(Eigen::Index j) const { return min_[j]; }
  double column_max(Eigen::Index j) const { return max_[j]; }

  /// Row holding exactly this statistic vector and offset, if any.
  std::optional<Eigen::Index> find_row(std::span<const double> stats, double offset) const;

  bool operator==(const StatTable& other) const;

 private:
  TableMeta meta_;
  Eigen::MatrixXd q_;
  std::vector<std::uint64_t> weights_;
  Eigen::VectorXd offsets_;
  Eigen::VectorXd log_weights_;
  std::vector<double> min_, max_;
};

struct BuildOptions {
  /// 0 = std::thread::hardware_concurrency().
  unsigned threads = 0;
  /// Upper bound on aggregation memory. Each worker owns a hash aggregate
  /// capped at memory_cap / threads bytes; a build whose distinct rows do
  /// not fit fails with std::length_error instead of growing unbounded.
  std::size_t memory_cap_bytes = std::size_t{1} << 30;
};

/// Streams the whole support once, drops graphs with a -inf offset and
/// collapses the rest by exact bit equality of (statistics, offset).
StatTable build_table(int n, bool directed, const ModelSpec& model,
                      const AttributeTable& attrs, const BuildOptions& options = {});

/// Per-column (min, max) over the table rows.
std::vector<std::pair<double, double>> table_bounds(const StatTable& table);

/// Stable content hash of (cell-order version, n, directed, canonical
/// formula, values of every attribute the model references).
std::string table_cache_key(int n, bool directed, const ModelSpec& model,
                            const AttributeTable& attrs);

/// Binary container, little-endian:
///   magic "EXGMTBL1", u32 format version, u32 n, u8 directed,
///   u64 total_graphs, u64 excluded_graphs, u64 rows, u64 cols,
///   string formula, string cache_key  (u64 length + bytes),
///   Q column-major f64[rows*cols], W u64[rows], O f64[rows],
///   32-byte SHA-256 of everything before it.
void save_table(const StatTable& table, const std::filesystem::path& path);
/// Throws std::runtime_error on a bad magic, version or checksum.
StatTable load_table(const std::filesystem::path& path);

/// Thread-safe table store keyed by table_cache_key, optionally persisted in
/// a directory. Corrupt files are reported through the warning sink and
/// rebuilt.
class TableCache {
 public:
  explicit TableCache(std::optional<std::filesystem::path> dir = std::nullopt,
                      BuildOptions options = {});

  std::shared_ptr<const StatTable> get(int n, bool directed, const ModelSpec& model,
                                       const AttributeTable& attrs);

  std::size_t size() const;
  std::size_t builds() const { return builds_; }
  void set_warning_sink(std::function<void(const std::string&)> sink);

 private:
  std::optional<std::filesystem::path> dir_;
  BuildOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const StatTable>> tables_;
  std::size_t builds_ = 0;
  std::function<void(const std::string&)> warn_;
};

}  // namespace exergm
