#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "exergm/likelihood.hpp"
#include "exergm/terms.hpp"

namespace exergm {

enum class Boundary { interior, at_min, at_max };

const char* boundary_name(Boundary b);

/// Coordinate j is at_max when the pooled observed sum equals the pooled
/// sum of per-table maxima (at_min likewise). Compared on the transformed
/// column values as stored in the tables.
std::vector<Boundary> check_boundary(const PooledData& data);

struct FitOptions {
  std::optional<Eigen::VectorXd> initial;  // default: zeros
  double gradient_tolerance = 1e-8;        // infinity norm
  int max_iterations = 200;
  double large_value = 1e5;                // substitute for +-inf coordinates
};

/// Return codes of the post-fit evaluation.
enum class FitStatus {
  converged = 0,                 // 00
  converged_not_pd = 1,          // 01
  not_converged = 10,            // 10
  not_converged_not_pd = 11,     // 11
  partial_infinite = 20,         // 20
  partial_infinite_not_pd = 21,  // 21
  all_infinite = 30,             // 30
};

/// Two-digit code, e.g. "00".
std::string status_code(FitStatus s);
std::string status_message(FitStatus s);
/// Any of 20, 21, 30.
bool has_infinite_estimates(FitStatus s);

struct FitResult {
  std::vector<std::string> term_names;
  std::string formula;
  Eigen::VectorXd theta;            // +-inf on boundary coordinates
  Eigen::VectorXd theta_evaluated;  // boundary coordinates at +-large_value
  Eigen::MatrixXd vcov;             // zero rows/cols for boundary coordinates
  bool has_vcov = false;
  Eigen::MatrixXd hessian;
  double loglik = 0.0;              // at theta_evaluated
  Eigen::VectorXd gradient;
  std::vector<Boundary> boundary;
  FitStatus status = FitStatus::converged;
  bool converged = false;
  int iterations = 0;
  bool restarted = false;
  long n_obs = 0;
  std::string data_fingerprint;

  Eigen::Index size() const { return theta.size(); }
  /// SHA-256 over the numeric content; equal for bit-identical fits.
  std::string fingerprint() const;
};

/// Maximizes the pooled exact likelihood with BFGS on the interior
/// coordinates (boundary coordinates held at sign * large_value), then
/// assigns the status code and a Moore-Penrose covariance. Only structural
/// problems throw; numerical trouble is reported through `status`.
FitResult fit_mle(const PooledData& data, const ModelSpec& model, const FitOptions& options = {});

FitResult fit_mle(const NetworkSample& sample, const ModelSpec& model, TableCache& cache,
                  const FitOptions& options = {});

/// Pseudo-inverse of a symmetric matrix via its eigendecomposition;
/// eigenvalues with |lambda| <= rel_tol * max|lambda| are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

/// True when every eigenvalue of the symmetric matrix exceeds both
/// rel_tol * max|lambda| and abs_tol.
bool is_positive_definite(const Eigen::MatrixXd& m, double rel_tol = 1e-10, double abs_tol = 0.0);

struct CoefficientRow {
  std::string term;
  double estimate;
  double std_error;
  double z;
  double p_value;  // two-sided normal; NaN when the SE is zero
  Boundary boundary;
};

/// Throws std::invalid_argument for status 30 (no covariance).
const Eigen::MatrixXd& vcov_of(const FitResult& fit);
std::vector<CoefficientRow> coefficient_table(const FitResult& fit);

}  // namespace exergm
