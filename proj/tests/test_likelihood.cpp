#include <doctest.h>

#include <cmath>
#include <random>

#include "exergm/formula.hpp"
#include "exergm/likelihood.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace exergm;
using testing_util::graph_with_ties;
using testing_util::network;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

NetworkSample random_sample(int count, std::mt19937_64& rng, int n_low = 3, int n_high = 4) {
  std::uniform_int_distribution<int> size(n_low, n_high);
  NetworkSample s;
  for (int i = 0; i < count; ++i) {
    const int n = size(rng);
    Network net = network(std::to_string(i), testing_util::random_graph(n, true, rng));
    std::vector<double> g(n);
    for (int k = 0; k < n; ++k) g[k] = static_cast<double>(rng() % 2);
    net.attributes.set("g", g);
    s.push_back(std::move(net));
  }
  return s;
}

}  // namespace

TEST_CASE("log kappa closed forms") {
  TableCache cache;
  const auto t3 = cache.get(3, true, parse_formula("edges"), AttributeTable(3));
  CHECK(log_kappa(vec({0}), *t3) == doctest::Approx(std::log(64.0)).epsilon(1e-14));
  CHECK(log_kappa(vec({1}), *t3) == doctest::Approx(6 * std::log(1 + std::exp(1.0))).epsilon(1e-14));
  CHECK(log_kappa(vec({1}), *t3) == doctest::Approx(7.8801).epsilon(1e-4));
  const auto t4 = cache.get(4, true, parse_formula("edges"), AttributeTable(4));
  CHECK(log_kappa(vec({0}), *t4) == doctest::Approx(std::log(4096.0)).epsilon(1e-14));
}

TEST_CASE("pooled loglik simple cases") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  const PooledData one = make_pooled_data({network("a", Graph(3, true))}, m, cache);
  CHECK(loglik_pooled(vec({0}), one) == doctest::Approx(-std::log(64.0)));
  const PooledData two = make_pooled_data(
      {network("a", graph_with_ties(4, true, 3)), network("b", graph_with_ties(4, true, 9))}, m, cache);
  CHECK(loglik_pooled(vec({0}), two) == doctest::Approx(-2 * std::log(4096.0)));
  CHECK(two.groups().size() == 1);
  CHECK(two.n_obs() == 24);
}

TEST_CASE("gradient and hessian closed forms") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  const PooledData d = make_pooled_data({network("a", graph_with_ties(4, true, 6))}, m, cache);
  CHECK(gradient_pooled(vec({0}), d)[0] == doctest::Approx(0.0));
  CHECK(hessian_pooled(vec({0}), d)(0, 0) == doctest::Approx(-3.0));
}

TEST_CASE("engine loglik and gradient match the oracle") {
  std::mt19937_64 rng(1);
  TableCache cache;
  const ModelSpec m = parse_formula("edges + ttriad + nodematch(g) + mutual");
  std::uniform_real_distribution<double> th(-1.5, 1.5);
  for (int rep = 0; rep < 20; ++rep) {
    const NetworkSample s = random_sample(4, rng);
    const PooledData d = make_pooled_data(s, m, cache);
    const std::vector<double> theta{th(rng), th(rng) / 3, th(rng), th(rng)};
    const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(theta.data(), 4);
    const auto o = oracle::oracle_loglik(theta, m, s);
    const LikelihoodValue v = evaluate_pooled(t, d, false);
    CHECK(std::abs(v.loglik - o.value) < 1e-10);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(v.gradient[j] - o.gradient[j]) < 1e-8);
  }
}

TEST_CASE("fivenets-style model matches the per-graph probability product") {
  std::mt19937_64 rng(2);
  TableCache cache;
  const ModelSpec m = parse_formula("edges + nodematch(g)");
  NetworkSample s = random_sample(5, rng, 4, 4);
  const std::vector<double> theta{-2, 2};
  const PooledData d = make_pooled_data(s, m, cache);
  double expect = 0;
  for (const auto& net : s) {
    const auto p = oracle::oracle_prob(theta, m, net.attributes, 4, true);
    expect += std::log(p[oracle::encode(oracle::from_graph(net.graph), true)]);
  }
  CHECK(loglik_pooled(vec({-2, 2}), d) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("collapsed and per-graph logliks agree at n = 3") {
  std::mt19937_64 rng(6);
  TableCache cache;
  const ModelSpec m = parse_formula("edges + mutual + ttriad");
  for (int rep = 0; rep < 20; ++rep) {
    const NetworkSample s = random_sample(3, rng, 3, 3);
    std::uniform_real_distribution<double> th(-2, 2);
    const std::vector<double> theta{th(rng), th(rng), th(rng)};
    const auto o = oracle::oracle_loglik(theta, m, s);
    CHECK(std::abs(loglik_pooled(Eigen::Map<const Eigen::VectorXd>(theta.data(), 3),
                                 make_pooled_data(s, m, cache)) - o.value) < 1e-12);
  }
}

TEST_CASE("finite differences: gradient and hessian") {
  std::mt19937_64 rng(7);
  TableCache cache;
  const ModelSpec m = parse_formula("edges + ttriad");
  std::uniform_real_distribution<double> th(-3, 3);
  for (int rep = 0; rep < 30; ++rep) {
    const PooledData d = make_pooled_data(random_sample(3, rng, 3, 5), m, cache);
    const Eigen::VectorXd t = vec({th(rng), th(rng)});
    const LikelihoodValue v = evaluate_pooled(t, d, true);
    CHECK(v.hessian.isApprox(v.hessian.transpose(), 0.0));
    const double h = 1e-5;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd up = t, dn = t;
      up[j] += h;
      dn[j] -= h;
      const double fd = (loglik_pooled(up, d) - loglik_pooled(dn, d)) / (2 * h);
      CHECK(std::abs(fd - v.gradient[j]) <= 1e-6 * std::max(1.0, std::abs(v.gradient[j])));
      const Eigen::VectorXd hd = (gradient_pooled(up, d) - gradient_pooled(dn, d)) / (2 * h);
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(hd[i] - v.hessian(i, j)) <= 1e-5 * std::max(1.0, std::abs(v.hessian(i, j))));
      }
    }
  }
}

TEST_CASE("log kappa is convex and constraints never increase it") {
  std::mt19937_64 rng(9);
  TableCache cache;
  const auto t = cache.get(4, true, parse_formula("edges + ttriad"), AttributeTable(4));
  const auto c = cache.get(4, true, parse_formula("edges + ttriad + constraint(edges >= 3)"), AttributeTable(4));
  std::uniform_real_distribution<double> th(-3, 3), w(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd a = vec({th(rng), th(rng)});
    const Eigen::VectorXd b = vec({th(rng), th(rng)});
    const double l = w(rng);
    CHECK(log_kappa(l * a + (1 - l) * b, *t) <= l * log_kappa(a, *t) + (1 - l) * log_kappa(b, *t) + 1e-12);
    CHECK(log_kappa(a, *c) <= log_kappa(a, *t));
  }
}

TEST_CASE("statistic distributions") {
  TableCache cache;
  const auto t = cache.get(4, true, parse_formula("edges"), AttributeTable(4));
  const StatDistribution d = stat_distribution(vec({0}), *t, 0);
  REQUIRE(d.values.size() == 13);
  for (int k = 0; k <= 12; ++k) {
    CHECK(d.probabilities[k] == doctest::Approx(oracle::binomial(12, k) / 4096).epsilon(1e-14));
  }
  const auto c = cache.get(4, true, parse_formula("edges + constraint(edges >= 5)"), AttributeTable(4));
  CHECK(stat_distribution(vec({0}), *c, 0).cdf_at(4) == 0.0);

  std::mt19937_64 rng(3);
  const auto tt = cache.get(4, true, parse_formula("edges + ttriad"), AttributeTable(4));
  std::uniform_real_distribution<double> th(-2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const StatDistribution s = stat_distribution(vec({th(rng), th(rng) / 4}), *tt, 1);
    double sum = 0;
    for (double p : s.probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("likelihood surface") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges + ttriad");
  std::mt19937_64 rng(12);
  const PooledData d = make_pooled_data(random_sample(6, rng, 4, 4), m, cache);
  std::vector<double> grid;
  for (int i = -10; i <= 10; ++i) grid.push_back(i * 0.2);
  const Eigen::MatrixXd s = loglik_surface(d, vec({0, 0}), 0, 1, grid, grid);
  CHECK(s.rows() == 21);
  CHECK(s(10, 10) == doctest::Approx(loglik_pooled(vec({0, 0}), d)));
  CHECK_THROWS(loglik_surface(d, vec({0, 0}), 0, 0, grid, grid));

  // 6 of 12 ties: symmetric about 0 in the edges coordinate
  const PooledData half = make_pooled_data({network("h", graph_with_ties(4, true, 6))},
                                           parse_formula("edges + mutual"), cache);
  (void)half;
  const PooledData e = make_pooled_data({network("h", graph_with_ties(4, true, 6))}, parse_formula("edges"), cache);
  for (double x : {0.3, 1.0, 2.5}) {
    CHECK(loglik_pooled(vec({x}), e) == doctest::Approx(loglik_pooled(vec({-x}), e)).epsilon(1e-13));
  }

  // shifting an offset shifts the surface uniformly
  const PooledData o1 = make_pooled_data({network("h", graph_with_ties(4, true, 5))},
                                         parse_formula("edges + mutual"), cache);
  const PooledData o2 = make_pooled_data({network("h", graph_with_ties(4, true, 5))},
                                         parse_formula("edges + mutual + offset(edges * I(n == 4))"), cache);
  const Eigen::MatrixXd a = loglik_surface(o1, vec({0, 0}), 0, 1, grid, grid);
  const Eigen::MatrixXd b = loglik_surface(o2, vec({0, 0}), 0, 1, grid, grid);
  // offset(edges) equals a shift of the edges coordinate by one
  CHECK(b(0, 3) == doctest::Approx(a(5, 3)).epsilon(1e-12));
}
