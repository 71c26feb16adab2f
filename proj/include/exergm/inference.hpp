#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "exergm/estimation.hpp"
#include "exergm/likelihood.hpp"

namespace exergm {

struct LrTest {
  double statistic;
  int df;
  double p_value;
};

/// Likelihood-ratio test of nested fits on the same sample. Both fits must
/// be free of infinite estimates; the restricted terms must be a subset of
/// the full terms.
LrTest lr_test(const FitResult& restricted, const FitResult& full);

/// -2 ll + 2k
double aic(const FitResult& fit);
/// -2 ll + k log(N), N = total free tie cells across networks.
double bic(const FitResult& fit);

struct BootResult {
  Eigen::MatrixXd replicates;  // successful replicates x terms, in replicate order
  Eigen::MatrixXd vcov;        // sample covariance of the replicates
  int requested = 0;
  int failed = 0;              // replicates with status 20, 21 or 30
  std::uint64_t seed = 0;
};

struct BootOptions {
  int replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  FitOptions fit;
};

/// Network-level resampling with replacement; replicate r uses
/// split_seed(seed, r) and refits on the already built tables.
BootResult bootstrap(const PooledData& data, const ModelSpec& model, const BootOptions& options);

struct GofRow {
  std::size_t network;
  std::string network_id;
  std::size_t term;
  std::string term_name;
  double observed;
  double support_min;
  double support_max;
  double lower;
  double upper;
  bool covered;
};

struct GofReport {
  double alpha = 0.1;
  std::vector<GofRow> rows;
  double coverage() const;
};

/// Equal-tailed exact interval per (network, term) from the marginal law at
/// the fitted parameters: lower = min{v : F(v) >= alpha/2},
/// upper = min{v : F(v) >= 1 - alpha/2}.
GofReport gof_exact(const FitResult& fit, const PooledData& data, double alpha);

std::string gof_to_csv(const GofReport& report);
/// Plot-ready JSON text: one entry per network with per-term intervals.
std::string gof_to_json(const GofReport& report);

}  // namespace exergm
