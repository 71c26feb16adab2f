#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "exergm/graph.hpp"
#include "exergm/stat_table.hpp"
#include "exergm/terms.hpp"

namespace exergm {

/// Observed statistics of one network together with its support table.
struct NetworkData {
  std::string id;
  Eigen::VectorXd observed;
  double observed_offset = 0.0;
  std::shared_ptr<const StatTable> table;
};

/// Networks sharing one model. Networks that share a table are grouped so
/// each distinct table is summed once per evaluation; groups keep
/// first-appearance order, which fixes the reduction order.
class PooledData {
 public:
  struct Group {
    std::shared_ptr<const StatTable> table;
    double count;
  };

  PooledData(std::vector<NetworkData> networks, std::string fingerprint = {});

  const std::vector<NetworkData>& networks() const { return networks_; }
  const std::vector<Group>& groups() const { return groups_; }
  std::size_t size() const { return networks_.size(); }
  Eigen::Index dims() const { return dims_; }
  const Eigen::VectorXd& observed_total() const { return observed_total_; }
  double offset_total() const { return offset_total_; }
  /// Number of free tie cells summed over networks.
  long n_obs() const { return n_obs_; }
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::vector<NetworkData> networks_;
  std::vector<Group> groups_;
  Eigen::Index dims_ = 0;
  Eigen::VectorXd observed_total_;
  double offset_total_ = 0.0;
  long n_obs_ = 0;
  std::string fingerprint_;
};

/// Content hash of graphs, ids and attributes.
std::string sample_fingerprint(const NetworkSample& sample);

/// Evaluates observed statistics and fetches (or builds) every table.
/// Throws std::invalid_argument when an observed graph violates a
/// constraint (its log-probability is -inf).
PooledData make_pooled_data(const NetworkSample& sample, const ModelSpec& model,
                            TableCache& cache);

/// log sum_r W_r exp(Q_r theta + O_r), max-shifted.
double log_kappa(const Eigen::VectorXd& theta, const StatTable& table);

/// Row probabilities softmax(Q theta + O + log W).
Eigen::VectorXd row_probabilities(const Eigen::VectorXd& theta, const StatTable& table);

struct TableMoments {
  double log_kappa = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // empty unless requested
};

TableMoments table_moments(const Eigen::VectorXd& theta, const StatTable& table,
                           bool with_covariance);

struct LikelihoodValue {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // empty unless requested
};

/// One pass computing sum_p [theta's_p + o_p - log kappa_p] and its exact
/// derivatives: gradient sum_p (s_p - E s), Hessian -sum_p Cov(s).
LikelihoodValue evaluate_pooled(const Eigen::VectorXd& theta, const PooledData& data,
                                bool with_hessian);

double loglik_pooled(const Eigen::VectorXd& theta, const PooledData& data);
Eigen::VectorXd gradient_pooled(const Eigen::VectorXd& theta, const PooledData& data);
Eigen::MatrixXd hessian_pooled(const Eigen::VectorXd& theta, const PooledData& data);

/// Exact marginal law of one statistic under theta.
struct StatDistribution {
  std::vector<double> values;         // ascending
  std::vector<double> probabilities;
  std::vector<double> cdf;

  /// P(S <= v).
  double cdf_at(double v) const;
  /// Smallest support value with CDF >= q (with 1e-12 slack for rounding).
  double quantile(double q) const;
};

StatDistribution stat_distribution(const Eigen::VectorXd& theta, const StatTable& table,
                                   Eigen::Index column);

/// Log-likelihood over a grid of two coordinates, others held at `theta`.
/// Result(a, b) is evaluated at theta[first] = grid_first[a],
/// theta[second] = grid_second[b].
Eigen::MatrixXd loglik_surface(const PooledData& data, const Eigen::VectorXd& theta,
                               Eigen::Index first, Eigen::Index second,
                               std::span<const double> grid_first,
                               std::span<const double> grid_second);

}  // namespace exergm
