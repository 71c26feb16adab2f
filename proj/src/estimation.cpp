#include "exergm/estimation.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "exergm/formula.hpp"
#include "exergm/hash.hpp"

namespace exergm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;  // log-likelihood
  double grad_norm = kInf;
  int iterations = 0;
  bool converged = false;
};

/// Maximizes the log-likelihood over the free coordinates.
class ReducedProblem {
 public:
  ReducedProblem(const PooledData& data, Eigen::VectorXd fixed, std::vector<Eigen::Index> free)
      : data_(data), base_(std::move(fixed)), free_(std::move(free)) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(free_.size()); }

  Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd theta = base_;
    for (Eigen::Index i = 0; i < size(); ++i) theta[free_[i]] = x[i];
    return theta;
  }

  // Negative log-likelihood and its gradient.
  double eval(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const LikelihoodValue v = evaluate_pooled(expand(x), data_, false);
    grad.resize(size());
    for (Eigen::Index i = 0; i < size(); ++i) grad[i] = -v.gradient[free_[i]];
    return -v.loglik;
  }

 private:
  const PooledData& data_;
  Eigen::VectorXd base_;
  std::vector<Eigen::Index> free_;
};

struct LineSearch {
  bool ok = false;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  double f = 0.0;
};

// Strong Wolfe line search (bracketing then bisection-safeguarded cubic zoom).
// The expansion phase lets steps grow where the objective is nearly linear,
// as it is once the fitted graphs saturate.
LineSearch wolfe_search(const ReducedProblem& problem, const Eigen::VectorXd& x, double f0,
                        const Eigen::VectorXd& g0, const Eigen::VectorXd& p, double alpha0) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  const double slope0 = g0.dot(p);
  const double tiny = 1e-12 * (1.0 + std::abs(f0));

  struct Point {
    double a, f, d;
    Eigen::VectorXd g;
  };
  auto probe = [&](double a) {
    Point pt{a, 0.0, 0.0, {}};
    pt.f = problem.eval(x + a * p, pt.g);
    pt.d = std::isfinite(pt.f) ? pt.g.dot(p) : kInf;
    return pt;
  };
  auto done = [&](const Point& pt) {
    return LineSearch{true, x + pt.a * p, pt.g, pt.f};
  };
  // Near the optimum f no longer resolves the decrease; a smaller gradient
  // is then the only usable signal.
  auto flat_accept = [&](const Point& pt) {
    return std::isfinite(pt.f) && std::abs(pt.f - f0) <= tiny &&
           pt.g.lpNorm<Eigen::Infinity>() < g0.lpNorm<Eigen::Infinity>();
  };

  auto zoom = [&](Point lo, Point hi) -> LineSearch {
    for (int i = 0; i < 40; ++i) {
      double a = 0.5 * (lo.a + hi.a);
      if (std::isfinite(hi.f)) {
        // cubic through (lo, hi), kept inside the middle of the bracket
        const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
        const double disc = d1 * d1 - lo.d * hi.d;
        if (disc >= 0) {
          const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
          const double c = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
          const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
          const double margin = 0.1 * (right - left);
          if (std::isfinite(c) && c > left + margin && c < right - margin) a = c;
        }
      }
      const Point mid = probe(a);
      if (!std::isfinite(mid.f) || mid.f > f0 + c1 * a * slope0 || mid.f >= lo.f) {
        if (flat_accept(mid)) return done(mid);
        hi = mid;
      } else {
        if (std::abs(mid.d) <= -c2 * slope0) return done(mid);
        if (mid.d * (hi.a - lo.a) >= 0) hi = lo;
        lo = mid;
      }
      if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, lo.a)) break;
    }
    if (lo.a > 0) return done(lo);
    return {};
  };

  Point prev{0.0, f0, slope0, g0};
  double a = alpha0;
  for (int i = 0; i < 60; ++i) {
    const Point cur = probe(a);
    if (!std::isfinite(cur.f) || cur.f > f0 + c1 * a * slope0 || (i > 0 && cur.f >= prev.f)) {
      if (flat_accept(cur)) return done(cur);
      return zoom(prev, cur);
    }
    if (std::abs(cur.d) <= -c2 * slope0) return done(cur);
    if (cur.d >= 0) return zoom(cur, prev);
    prev = cur;
    a *= 2.0;
  }
  return done(prev);
}

OptimResult bfgs(const ReducedProblem& problem, Eigen::VectorXd x, double tol, int max_iter) {
  const Eigen::Index k = problem.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd g;
  double f = problem.eval(x, g);
  OptimResult out;
  bool scaled = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (!std::isfinite(f) || g.lpNorm<Eigen::Infinity>() < tol) break;
    Eigen::VectorXd p = -h * g;
    if (!(g.dot(p) < 0)) {
      h.setIdentity();
      p = -g;
    }
    // The first trial step stays within a box of half-width 10.
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 10.0 / p.lpNorm<Eigen::Infinity>());
    LineSearch ls = wolfe_search(problem, x, f, g, p, alpha0);
    if (!ls.ok) break;
    const Eigen::VectorXd s = ls.x - x;
    const Eigen::VectorXd y = ls.g - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(k, k) - rho * s * y.transpose();
      h = left * h * left.transpose() + rho * s * s.transpose();
    }
    x = std::move(ls.x);
    g = std::move(ls.g);
    f = ls.f;
  }
  out.x = std::move(x);
  out.value = -f;
  out.grad_norm = g.lpNorm<Eigen::Infinity>();
  out.iterations = it;
  out.converged = std::isfinite(f) && out.grad_norm < tol;
  return out;
}

}  // namespace

const char* boundary_name(Boundary b) {
  switch (b) {
    case Boundary::interior: return "interior";
    case Boundary::at_min: return "at-min";
    case Boundary::at_max: return "at-max";
  }
  return "?";
}

std::vector<Boundary> check_boundary(const PooledData& data) {
  const Eigen::Index k = data.dims();
  std::vector<Boundary> out(k, Boundary::interior);
  for (Eigen::Index j = 0; j < k; ++j) {
    double lo = 0.0, hi = 0.0;
    for (const auto& net : data.networks()) {
      lo += net.table->column_min(j);
      hi += net.table->column_max(j);
    }
    const double obs = data.observed_total()[j];
    // A column constant over every support is unidentified, not a boundary.
    if (lo == hi) continue;
    if (obs == hi) out[j] = Boundary::at_max;
    else if (obs == lo) out[j] = Boundary::at_min;
  }
  return out;
}

std::string status_code(FitStatus s) {
  const int v = static_cast<int>(s);
  return std::to_string(v / 10) + std::to_string(v % 10);
}

std::string status_message(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "optimizer converged, no issues reported";
    case FitStatus::converged_not_pd: return "optimizer converged, but the Hessian is not p.s.d.";
    case FitStatus::not_converged: return "optimizer did not converge, but the estimates look OK";
    case FitStatus::not_converged_not_pd:
      return "optimizer did not converge, and the Hessian is not p.s.d.";
    case FitStatus::partial_infinite:
      return "a subset of the parameter estimates was replaced with +/-Inf";
    case FitStatus::partial_infinite_not_pd:
      return "a subset of the parameter estimates was replaced with +/-Inf, and the Hessian "
             "is not p.s.d.";
    case FitStatus::all_infinite:
      return "all parameters went to +/-Inf; the MLE may not exist";
  }
  return "unknown status";
}

bool has_infinite_estimates(FitStatus s) {
  return s == FitStatus::partial_infinite || s == FitStatus::partial_infinite_not_pd ||
         s == FitStatus::all_infinite;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return m;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cut = rel_tol * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) > cut && ev[i] != 0.0) inv[i] = 1.0 / ev[i];
  }
  Eigen::MatrixXd out = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

bool is_positive_definite(const Eigen::MatrixXd& m, double rel_tol, double abs_tol) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  return top > 0.0 && ev.minCoeff() > std::max(rel_tol * top, abs_tol);
}

FitResult fit_mle(const PooledData& data, const ModelSpec& model, const FitOptions& options) {
  model.validate();
  const Eigen::Index k = data.dims();
  if (static_cast<Eigen::Index>(model.size()) != k) {
    throw std::invalid_argument("model has " + std::to_string(model.size()) +
                                " terms but the data carry " + std::to_string(k) + " statistics");
  }
  if (options.gradient_tolerance <= 0 || options.max_iterations <= 0 || options.large_value <= 0) {
    throw std::invalid_argument("fit options must be positive");
  }
  Eigen::VectorXd init = options.initial.value_or(Eigen::VectorXd::Zero(k));
  if (init.size() != k || !init.allFinite()) {
    throw std::invalid_argument("initial parameter vector must be finite with " +
                                std::to_string(k) + " entries");
  }

  FitResult fit;
  fit.term_names = model.term_names();
  fit.formula = print_formula(model);
  fit.n_obs = data.n_obs();
  fit.data_fingerprint = data.fingerprint();
  fit.boundary = check_boundary(data);

  Eigen::VectorXd base = init;
  std::vector<Eigen::Index> free;
  fit.theta = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    switch (fit.boundary[j]) {
      case Boundary::at_max:
        base[j] = options.large_value;
        fit.theta[j] = kInf;
        break;
      case Boundary::at_min:
        base[j] = -options.large_value;
        fit.theta[j] = -kInf;
        break;
      case Boundary::interior:
        free.push_back(j);
        break;
    }
  }

  if (free.empty()) {
    fit.theta_evaluated = base;
    const LikelihoodValue v = evaluate_pooled(base, data, true);
    fit.loglik = v.loglik;
    fit.gradient = v.gradient;
    fit.hessian = Eigen::MatrixXd::Zero(k, k);
    fit.vcov = Eigen::MatrixXd::Zero(k, k);
    fit.has_vcov = false;
    fit.converged = true;
    fit.status = FitStatus::all_infinite;
    return fit;
  }

  const ReducedProblem problem(data, base, free);
  Eigen::VectorXd x0(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i) x0[i] = init[free[i]];
  OptimResult best = bfgs(problem, x0, options.gradient_tolerance, options.max_iterations);
  int iterations = best.iterations;
  if (!best.converged) {
    // One restart from a deterministic perturbation of the origin.
    Eigen::VectorXd x1(problem.size());
    for (Eigen::Index i = 0; i < x1.size(); ++i) x1[i] = (i % 2 == 0 ? 0.1 : -0.1);
    OptimResult second = bfgs(problem, x1, options.gradient_tolerance, options.max_iterations);
    iterations += second.iterations;
    fit.restarted = true;
    if (second.converged || second.value > best.value) best = std::move(second);
  }

  fit.theta_evaluated = problem.expand(best.x);
  for (Eigen::Index j : free) fit.theta[j] = fit.theta_evaluated[j];
  fit.iterations = iterations;
  fit.converged = best.converged;

  const LikelihoodValue v = evaluate_pooled(fit.theta_evaluated, data, true);
  fit.loglik = v.loglik;
  fit.gradient = v.gradient;
  fit.hessian = v.hessian;
  // Entries involving diverged coordinates are zeroed before inversion.
  for (Eigen::Index j = 0; j < k; ++j) {
    if (fit.boundary[j] != Boundary::interior) {
      fit.hessian.row(j).setZero();
      fit.hessian.col(j).setZero();
    }
  }
  Eigen::MatrixXd info_free(problem.size(), problem.size());
  for (Eigen::Index a = 0; a < problem.size(); ++a) {
    for (Eigen::Index b = 0; b < problem.size(); ++b) info_free(a, b) = -fit.hessian(free[a], free[b]);
  }
  // Curvature at the scale of the gradient tolerance is a direction the
  // optimizer ran along without finding an optimum (a combination of
  // statistics on the hull boundary), not an identified one.
  const bool pd = info_free.allFinite() &&
                  is_positive_definite(info_free, 1e-10, 10 * options.gradient_tolerance);
  fit.vcov = pseudo_inverse(-fit.hessian);
  fit.has_vcov = true;

  const bool partial = static_cast<Eigen::Index>(free.size()) < k;
  if (partial) {
    fit.status = pd ? FitStatus::partial_infinite : FitStatus::partial_infinite_not_pd;
  } else if (fit.converged) {
    fit.status = pd ? FitStatus::converged : FitStatus::converged_not_pd;
  } else {
    fit.status = pd ? FitStatus::not_converged : FitStatus::not_converged_not_pd;
  }
  return fit;
}

FitResult fit_mle(const NetworkSample& sample, const ModelSpec& model, TableCache& cache,
                  const FitOptions& options) {
  return fit_mle(make_pooled_data(sample, model, cache), model, options);
}

std::string FitResult::fingerprint() const {
  Sha256 h;
  h.update("exergm-fit|").update(formula).update("|").update(data_fingerprint);
  auto vec = [&](const Eigen::MatrixXd& m) {
    h.value(static_cast<long>(m.rows())).value(static_cast<long>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) h.value(std::bit_cast<std::uint64_t>(m.data()[i]));
  };
  vec(theta);
  vec(theta_evaluated);
  vec(vcov);
  vec(gradient);
  h.value(std::bit_cast<std::uint64_t>(loglik));
  h.value(static_cast<int>(status)).value(iterations);
  return h.hex();
}

const Eigen::MatrixXd& vcov_of(const FitResult& fit) {
  if (!fit.has_vcov) {
    throw std::invalid_argument("fit has status " + status_code(fit.status) +
                                " (" + status_message(fit.status) + "); no covariance available");
  }
  return fit.vcov;
}

std::vector<CoefficientRow> coefficient_table(const FitResult& fit) {
  static const boost::math::normal_distribution<double> kNormal;
  std::vector<CoefficientRow> out;
  for (Eigen::Index j = 0; j < fit.size(); ++j) {
    CoefficientRow row;
    row.term = fit.term_names[j];
    row.estimate = fit.theta[j];
    row.boundary = fit.boundary[j];
    const double var = fit.has_vcov ? fit.vcov(j, j) : 0.0;
    row.std_error = var > 0 ? std::sqrt(var) : 0.0;
    if (row.std_error > 0 && std::isfinite(row.estimate)) {
      row.z = row.estimate / row.std_error;
      row.p_value = 2.0 * boost::math::cdf(boost::math::complement(kNormal, std::abs(row.z)));
    } else {
      row.z = std::numeric_limits<double>::quiet_NaN();
      row.p_value = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace exergm
