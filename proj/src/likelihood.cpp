#include "exergm/likelihood.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "exergm/hash.hpp"

namespace exergm {

namespace {

void check_dims(const Eigen::VectorXd& theta, Eigen::Index k) {
  if (theta.size() != k) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, model has " + std::to_string(k) + " terms");
  }
}

Eigen::VectorXd linear_predictor(const Eigen::VectorXd& theta, const StatTable& table) {
  check_dims(theta, table.cols());
  Eigen::VectorXd eta = table.q() * theta + table.offsets() + table.log_weights();
  // 0 * inf never arises: theta is finite by contract.
  return eta;
}

}  // namespace

PooledData::PooledData(std::vector<NetworkData> networks, std::string fingerprint)
    : networks_(std::move(networks)), fingerprint_(std::move(fingerprint)) {
  if (networks_.empty()) throw std::invalid_argument("pooled data needs at least one network");
  dims_ = networks_.front().observed.size();
  observed_total_ = Eigen::VectorXd::Zero(dims_);
  std::map<const StatTable*, std::size_t> slot;
  for (const auto& net : networks_) {
    if (!net.table) throw std::invalid_argument("network '" + net.id + "' has no table");
    if (net.observed.size() != dims_ || net.table->cols() != dims_) {
      throw std::invalid_argument("network '" + net.id + "' has inconsistent dimensions");
    }
    if (!std::isfinite(net.observed_offset)) {
      throw std::invalid_argument("network '" + net.id +
                                  "' violates a support constraint; its probability is zero");
    }
    observed_total_ += net.observed;
    offset_total_ += net.observed_offset;
    n_obs_ += static_cast<long>(std::countr_zero(net.table->meta().total_graphs));
    auto [it, fresh] = slot.emplace(net.table.get(), groups_.size());
    if (fresh) groups_.push_back({net.table, 0.0});
    groups_[it->second].count += 1.0;
  }
}

std::string sample_fingerprint(const NetworkSample& sample) {
  Sha256 h;
  h.update("exergm-sample");
  for (const auto& net : sample) {
    h.update("|id=").update(net.id);
    h.value(net.graph.n()).value(static_cast<int>(net.graph.directed())).value(net.graph.index());
    for (const auto& [name, values] : net.attributes.values()) {
      h.update("|").update(name).update("=");
      for (double v : values) h.value(std::bit_cast<std::uint64_t>(v + 0.0));
    }
  }
  return h.hex();
}

PooledData make_pooled_data(const NetworkSample& sample, const ModelSpec& model,
                            TableCache& cache) {
  model.validate();
  std::vector<NetworkData> nets;
  nets.reserve(sample.size());
  for (const auto& net : sample) {
    const ModelEvaluator eval(model, net.attributes, net.graph.n(), net.graph.directed());
    NetworkData d;
    d.id = net.id;
    const auto s = eval.stats(net.graph);
    d.observed = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    d.observed_offset = eval.offset(net.graph);
    if (!std::isfinite(d.observed_offset)) {
      throw std::invalid_argument("network '" + net.id +
                                  "' violates a support constraint of the model");
    }
    d.table = cache.get(net.graph.n(), net.graph.directed(), model, net.attributes);
    nets.push_back(std::move(d));
  }
  return PooledData(std::move(nets), sample_fingerprint(sample));
}

double log_kappa(const Eigen::VectorXd& theta, const StatTable& table) {
  const Eigen::VectorXd eta = linear_predictor(theta, table);
  const double m = eta.maxCoeff();
  return m + std::log((eta.array() - m).exp().sum());
}

Eigen::VectorXd row_probabilities(const Eigen::VectorXd& theta, const StatTable& table) {
  const Eigen::VectorXd eta = linear_predictor(theta, table);
  const double m = eta.maxCoeff();
  Eigen::VectorXd p = (eta.array() - m).exp();
  p /= p.sum();
  return p;
}

TableMoments table_moments(const Eigen::VectorXd& theta, const StatTable& table,
                           bool with_covariance) {
  const Eigen::VectorXd eta = linear_predictor(theta, table);
  const double m = eta.maxCoeff();
  Eigen::VectorXd p = (eta.array() - m).exp();
  const double z = p.sum();
  p /= z;
  TableMoments out;
  out.log_kappa = m + std::log(z);
  out.mean = table.q().transpose() * p;
  if (with_covariance) {
    const Eigen::Index k = table.cols();
    const Eigen::MatrixXd centered = table.q().rowwise() - out.mean.transpose();
    const Eigen::MatrixXd weighted = centered.array().colwise() * p.array();
    out.covariance.resize(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = a; b < k; ++b) {
        const double v = weighted.col(a).dot(centered.col(b));
        out.covariance(a, b) = v;
        out.covariance(b, a) = v;
      }
    }
  }
  return out;
}

LikelihoodValue evaluate_pooled(const Eigen::VectorXd& theta, const PooledData& data,
                                bool with_hessian) {
  check_dims(theta, data.dims());
  LikelihoodValue out;
  out.loglik = theta.dot(data.observed_total()) + data.offset_total();
  out.gradient = data.observed_total();
  if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(data.dims(), data.dims());
  for (const auto& g : data.groups()) {
    const TableMoments mom = table_moments(theta, *g.table, with_hessian);
    out.loglik -= g.count * mom.log_kappa;
    out.gradient -= g.count * mom.mean;
    if (with_hessian) out.hessian -= g.count * mom.covariance;
  }
  return out;
}

double loglik_pooled(const Eigen::VectorXd& theta, const PooledData& data) {
  check_dims(theta, data.dims());
  double ll = theta.dot(data.observed_total()) + data.offset_total();
  for (const auto& g : data.groups()) ll -= g.count * log_kappa(theta, *g.table);
  return ll;
}

Eigen::VectorXd gradient_pooled(const Eigen::VectorXd& theta, const PooledData& data) {
  return evaluate_pooled(theta, data, false).gradient;
}

Eigen::MatrixXd hessian_pooled(const Eigen::VectorXd& theta, const PooledData& data) {
  return evaluate_pooled(theta, data, true).hessian;
}

double StatDistribution::cdf_at(double v) const {
  auto it = std::upper_bound(values.begin(), values.end(), v);
  if (it == values.begin()) return 0.0;
  return cdf[static_cast<std::size_t>(it - values.begin()) - 1];
}

double StatDistribution::quantile(double q) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (cdf[i] >= q - 1e-12) return values[i];
  }
  return values.back();
}

StatDistribution stat_distribution(const Eigen::VectorXd& theta, const StatTable& table,
                                   Eigen::Index column) {
  if (column < 0 || column >= table.cols()) {
    throw std::out_of_range("statistic column " + std::to_string(column) + " out of range");
  }
  const Eigen::VectorXd p = row_probabilities(theta, table);
  std::map<double, double> mass;
  for (Eigen::Index r = 0; r < table.rows(); ++r) mass[table.q()(r, column)] += p[r];
  StatDistribution d;
  double acc = 0.0;
  for (const auto& [v, pr] : mass) {
    d.values.push_back(v);
    d.probabilities.push_back(pr);
    acc += pr;
    d.cdf.push_back(acc);
  }
  // Pin the top of the CDF to exactly 1.
  if (!d.cdf.empty()) d.cdf.back() = 1.0;
  return d;
}

Eigen::MatrixXd loglik_surface(const PooledData& data, const Eigen::VectorXd& theta,
                               Eigen::Index first, Eigen::Index second,
                               std::span<const double> grid_first,
                               std::span<const double> grid_second) {
  check_dims(theta, data.dims());
  if (first < 0 || second < 0 || first >= data.dims() || second >= data.dims() || first == second) {
    throw std::invalid_argument("surface needs two distinct valid coordinates");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid_first.size()),
                      static_cast<Eigen::Index>(grid_second.size()));
  Eigen::VectorXd t = theta;
  for (std::size_t a = 0; a < grid_first.size(); ++a) {
    for (std::size_t b = 0; b < grid_second.size(); ++b) {
      t[first] = grid_first[a];
      t[second] = grid_second[b];
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = loglik_pooled(t, data);
    }
  }
  return out;
}

}  // namespace exergm
