#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "exergm/estimation.hpp"
#include "exergm/graph.hpp"
#include "exergm/stat_table.hpp"
#include "exergm/terms.hpp"

namespace exergm {

/// Graph indices grouped by table row, each group in enumeration order.
/// Costs 4 bytes per graph, so it is only offered for small supports.
class RowIndex {
 public:
  static constexpr int kMaxCells = 24;

  RowIndex(const StatTable& table, const ModelSpec& model, const AttributeTable& attrs);

  std::uint64_t graph(Eigen::Index row, std::uint64_t j) const;
  std::uint64_t row_size(Eigen::Index row) const { return start_[row + 1] - start_[row]; }

 private:
  std::vector<std::uint64_t> start_;
  std::vector<std::uint32_t> graphs_;
};

/// Exact sampler: a row is drawn with probability W exp(Q theta + O) / kappa,
/// then one of the W graphs of that row uniformly. The j-th graph of a row is
/// found either through a RowIndex or by one streaming pass over the support
/// that resolves a whole batch of draws; both give the same graphs.
class ExactSampler {
 public:
  ExactSampler(std::shared_ptr<const StatTable> table, const ModelSpec& model,
               const AttributeTable& attrs, const Eigen::VectorXd& theta,
               std::shared_ptr<const RowIndex> index = nullptr);

  std::vector<Graph> draw(std::size_t count, std::mt19937_64& rng) const;
  /// Row of each draw only (no graph recovery).
  std::vector<Eigen::Index> draw_rows(std::size_t count, std::mt19937_64& rng) const;

  const StatTable& table() const { return *table_; }

 private:
  std::shared_ptr<const StatTable> table_;
  ModelSpec model_;
  AttributeTable attrs_;
  std::shared_ptr<const RowIndex> index_;
  std::vector<double> cumulative_;
};

std::vector<Graph> sample_graphs(const Eigen::VectorXd& theta, const ModelSpec& model, int n,
                                 bool directed, const AttributeTable& attrs, std::size_t count,
                                 std::uint64_t seed, TableCache& cache);

/// Five networks of size four; gender ~ Bernoulli(0.5) per node is drawn
/// first, then each graph from edges + nodematch(gender) at (-2, 2).
NetworkSample regenerate_fivenets(std::uint64_t seed, TableCache& cache);

/// networks x terms matrix of observed statistics.
Eigen::MatrixXd observed_statistics(const NetworkSample& sample, const ModelSpec& model);

/// Keep iff check_boundary reports every coordinate interior.
bool boundary_filter(const PooledData& data);
bool boundary_filter(const NetworkSample& sample, const ModelSpec& model, TableCache& cache);

struct StudyConfig {
  std::string name = "power";
  int replications = 1000;
  /// Each generating coordinate is sign * U(theta_low, theta_high), sign
  /// +-1 with equal probability, independently across coordinates.
  double theta_low = 0.1;
  double theta_high = 2.0;
  /// Replication r uses sample_sizes[r % size].
  std::vector<int> sample_sizes{5, 10, 30, 50, 100, 150, 200, 300};
  /// A sample of N networks has N - j of size small_n and j of size large_n,
  /// j ~ U{0..N}.
  int small_n = 4;
  int large_n = 5;
  bool directed = true;
  std::string generating_model = "edges + ttriad";
  std::string fitting_model = "edges + ttriad";
  double level = 0.05;
  std::uint64_t seed = 1;
  std::vector<double> bin_edges{0.1, 0.5, 1.0, 2.0};
  unsigned threads = 1;

  void validate() const;
  /// Hash of every field except threads.
  std::string fingerprint() const;
};

/// JSON form of a config. Reading accepts "preset": "power" | "type_one"
/// (plus "full_scale") and overrides any listed field.
std::string study_config_to_json(const StudyConfig& config);
StudyConfig study_config_from_json(std::string_view text);

/// Desk-scale presets; full_scale restores the 20,000 / 35,000 replications.
StudyConfig power_study_config(bool full_scale = false);
StudyConfig type_one_study_config(bool full_scale = false);

struct ReplicationRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  int sample_size = 0;
  int n_small = 0;
  int n_large = 0;
  Eigen::VectorXd theta_true;  // generating model order
  bool kept = false;           // passed boundary_filter
  bool failed = false;         // threw; message in error
  std::string error;
  std::string status;          // status code when fitted
  Eigen::VectorXd estimate;    // fitting model order
  Eigen::VectorXd std_error;
  Eigen::VectorXd p_value;
  double seconds = 0.0;

  /// Kept, fitted, finite estimates and a positive definite information
  /// matrix (status 00 or 10).
  bool usable() const;
};

struct BiasRow {
  std::string term;
  int count;
  double mean;
  double sd;
  double ci_low;
  double ci_high;
};

struct PowerRow {
  std::string term;
  int sample_size;
  double bin_low;
  double bin_high;
  int count;
  int significant;
  double power;
};

struct TypeOneRow {
  std::string term;
  int sample_size;
  int count;
  int rejected;
  double rate;
};

struct StudyAggregates {
  int kept = 0;
  int usable = 0;
  int failed = 0;
  std::vector<BiasRow> bias;        // coordinates shared by both models
  std::vector<PowerRow> power;      // same coordinates, by size x |theta| bin
  std::vector<TypeOneRow> type_one; // fitted coordinates absent from the generator
};

struct StudyResult {
  StudyConfig config;
  std::vector<ReplicationRecord> records;  // ordered by replication
  StudyAggregates aggregates;
};

StudyAggregates aggregate_study(const StudyConfig& config,
                                const std::vector<ReplicationRecord>& records);

/// Runs (or resumes) a study. With a checkpoint path every finished
/// replication is appended as one JSON line; a rerun with the same config
/// skips replications already on file. Replication failures are recorded,
/// never thrown.
StudyResult run_sim_study(const StudyConfig& config, TableCache& cache,
                          const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

std::string record_to_json(const ReplicationRecord& record);
ReplicationRecord record_from_json(const std::string& line);
std::string aggregates_to_csv(const StudyAggregates& aggregates);

}  // namespace exergm
