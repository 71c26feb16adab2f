#include "exergm/inference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "exergm/hash.hpp"
#include "json_num.hpp"

namespace exergm {

LrTest lr_test(const FitResult& restricted, const FitResult& full) {
  if (restricted.data_fingerprint != full.data_fingerprint) {
    throw std::invalid_argument("likelihood-ratio test needs fits on the same sample");
  }
  if (has_infinite_estimates(restricted.status) || has_infinite_estimates(full.status)) {
    throw std::invalid_argument("likelihood-ratio test needs fits without infinite estimates");
  }
  for (const auto& name : restricted.term_names) {
    if (std::find(full.term_names.begin(), full.term_names.end(), name) == full.term_names.end()) {
      throw std::invalid_argument("models are not nested: '" + name +
                                  "' is missing from the full model");
    }
  }
  LrTest t;
  t.df = static_cast<int>(full.size() - restricted.size());
  if (t.df < 0) throw std::invalid_argument("restricted model has more terms than the full model");
  t.statistic = std::max(0.0, 2.0 * (full.loglik - restricted.loglik));
  if (t.df == 0) {
    t.p_value = 1.0;
  } else {
    const boost::math::chi_squared_distribution<double> chi(t.df);
    t.p_value = boost::math::cdf(boost::math::complement(chi, t.statistic));
  }
  return t;
}

double aic(const FitResult& fit) {
  return -2.0 * fit.loglik + 2.0 * static_cast<double>(fit.size());
}

double bic(const FitResult& fit) {
  return -2.0 * fit.loglik + static_cast<double>(fit.size()) * std::log(static_cast<double>(fit.n_obs));
}

BootResult bootstrap(const PooledData& data, const ModelSpec& model, const BootOptions& options) {
  if (options.replicates < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
  const auto& nets = data.networks();
  const int R = options.replicates;
  const Eigen::Index k = data.dims();

  std::vector<Eigen::VectorXd> estimates(R);
  std::vector<char> ok(R, 0);
  std::vector<std::exception_ptr> errors(R);

  auto run = [&](int r) {
    try {
      std::mt19937_64 rng(split_seed(options.seed, static_cast<std::uint64_t>(r)));
      std::uniform_int_distribution<std::size_t> pick(0, nets.size() - 1);
      std::vector<NetworkData> draw;
      draw.reserve(nets.size());
      for (std::size_t i = 0; i < nets.size(); ++i) draw.push_back(nets[pick(rng)]);
      const PooledData resampled(std::move(draw), data.fingerprint());
      const FitResult fit = fit_mle(resampled, model, options.fit);
      if (!has_infinite_estimates(fit.status)) {
        estimates[r] = fit.theta;
        ok[r] = 1;
      }
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    for (int r = 0; r < R; ++r) run(r);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int r = static_cast<int>(t); r < R; r += static_cast<int>(threads)) run(r);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BootResult out;
  out.requested = R;
  out.seed = options.seed;
  const int good = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
  out.failed = R - good;
  if (good == 0) {
    throw std::runtime_error("all " + std::to_string(R) +
                             " bootstrap replicates produced infinite estimates");
  }
  out.replicates.resize(good, k);
  int row = 0;
  for (int r = 0; r < R; ++r) {
    if (ok[r]) out.replicates.row(row++) = estimates[r].transpose();
  }
  const Eigen::RowVectorXd mean = out.replicates.colwise().mean();
  const Eigen::MatrixXd centered = out.replicates.rowwise() - mean;
  out.vcov = good > 1 ? Eigen::MatrixXd(centered.transpose() * centered / (good - 1))
                      : Eigen::MatrixXd::Zero(k, k);
  return out;
}

double GofReport::coverage() const {
  if (rows.empty()) return 1.0;
  const auto hits = std::count_if(rows.begin(), rows.end(), [](const GofRow& r) { return r.covered; });
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

GofReport gof_exact(const FitResult& fit, const PooledData& data, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (fit.size() != data.dims()) throw std::invalid_argument("fit and data dimensions differ");
  GofReport report;
  report.alpha = alpha;
  const auto& nets = data.networks();
  for (std::size_t p = 0; p < nets.size(); ++p) {
    for (Eigen::Index j = 0; j < data.dims(); ++j) {
      const StatDistribution d = stat_distribution(fit.theta_evaluated, *nets[p].table, j);
      GofRow row;
      row.network = p;
      row.network_id = nets[p].id;
      row.term = static_cast<std::size_t>(j);
      row.term_name = j < static_cast<Eigen::Index>(fit.term_names.size()) ? fit.term_names[j] : "";
      row.observed = nets[p].observed[j];
      row.support_min = nets[p].table->column_min(j);
      row.support_max = nets[p].table->column_max(j);
      row.lower = d.quantile(alpha / 2);
      row.upper = d.quantile(1 - alpha / 2);
      row.covered = row.observed >= row.lower && row.observed <= row.upper;
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string gof_to_csv(const GofReport& report) {
  using detail::shortest;
  std::ostringstream out;
  out << "network,network_id,term,observed,support_min,support_max,lower,upper,covered\n";
  for (const auto& r : report.rows) {
    out << r.network << ',' << r.network_id << ',' << '"' << r.term_name << '"' << ','
        << shortest(r.observed) << ',' << shortest(r.support_min) << ','
        << shortest(r.support_max) << ',' << shortest(r.lower) << ',' << shortest(r.upper) << ','
        << (r.covered ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string gof_to_json(const GofReport& report) {
  nlohmann::ordered_json j;
  j["level"] = 1.0 - report.alpha;
  j["alpha"] = report.alpha;
  j["coverage"] = report.coverage();
  nlohmann::ordered_json nets = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    if (nets.empty() || nets.back()["network"] != r.network) {
      nets.push_back({{"network", r.network}, {"id", r.network_id}, {"terms", nlohmann::ordered_json::array()}});
    }
    nets.back()["terms"].push_back({{"term", r.term_name},
                                    {"observed", r.observed},
                                    {"min", r.support_min},
                                    {"max", r.support_max},
                                    {"lower", r.lower},
                                    {"upper", r.upper},
                                    {"covered", r.covered}});
  }
  j["networks"] = nets;
  return j.dump(2);
}

}  // namespace exergm
