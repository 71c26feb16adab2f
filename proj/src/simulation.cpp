#include "exergm/simulation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "exergm/formula.hpp"
#include "exergm/hash.hpp"
#include "exergm/likelihood.hpp"
#include "json_num.hpp"

namespace exergm {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint32_t kNoRow = 0xffffffffu;

void check_table_matches(const StatTable& table, const ModelSpec& model,
                         const AttributeTable& attrs) {
  if (table.meta().cache_key != table_cache_key(table.meta().n, table.meta().directed, model, attrs)) {
    throw std::invalid_argument("table was built for a different model or attributes");
  }
}

// Calls f(graph, row) for every graph the table holds, in enumeration
// order, until f returns false.
template <typename F>
void label_support(const StatTable& table, const ModelSpec& model, const AttributeTable& attrs,
                   F&& f) {
  const int n = table.meta().n;
  const bool directed = table.meta().directed;
  const ModelEvaluator eval(model, attrs, n, directed);
  const GraphDecoder decoder(n, directed);
  std::vector<double> s(eval.size());
  Graph g(n, directed);
  const std::uint64_t total = support_size(n, directed);
  for (std::uint64_t k = 0; k < total; ++k) {
    decoder.decode(k, g);
    const double off = eval.offset(g);
    if (!std::isfinite(off)) continue;
    eval.stats(g, s);
    const auto row = table.find_row(s, off);
    if (!row) throw std::logic_error("graph statistics missing from the support table");
    if (!f(g, *row)) return;
  }
}

}  // namespace

RowIndex::RowIndex(const StatTable& table, const ModelSpec& model, const AttributeTable& attrs) {
  check_table_matches(table, model, attrs);
  const int cells = cell_count(table.meta().n, table.meta().directed);
  if (cells > kMaxCells) {
    throw std::invalid_argument("row index supports at most " + std::to_string(kMaxCells) +
                                " tie cells, got " + std::to_string(cells));
  }
  const std::uint64_t total = support_size(table.meta().n, table.meta().directed);
  std::vector<std::uint32_t> labels(total, kNoRow);
  label_support(table, model, attrs, [&](const Graph& g, Eigen::Index row) {
    labels[g.index()] = static_cast<std::uint32_t>(row);
    return true;
  });
  start_.assign(static_cast<std::size_t>(table.rows()) + 1, 0);
  for (auto r : labels) {
    if (r != kNoRow) ++start_[r + 1];
  }
  for (std::size_t r = 1; r < start_.size(); ++r) start_[r] += start_[r - 1];
  graphs_.resize(start_.back());
  std::vector<std::uint64_t> fill(start_.begin(), start_.end() - 1);
  for (std::uint64_t k = 0; k < total; ++k) {
    if (labels[k] != kNoRow) graphs_[fill[labels[k]]++] = static_cast<std::uint32_t>(k);
  }
}

std::uint64_t RowIndex::graph(Eigen::Index row, std::uint64_t j) const {
  if (j >= row_size(row)) throw std::out_of_range("row index position out of range");
  return graphs_[start_[row] + j];
}

ExactSampler::ExactSampler(std::shared_ptr<const StatTable> table, const ModelSpec& model,
                           const AttributeTable& attrs, const Eigen::VectorXd& theta,
                           std::shared_ptr<const RowIndex> index)
    : table_(std::move(table)), model_(model), attrs_(attrs), index_(std::move(index)) {
  if (!table_) throw std::invalid_argument("sampler needs a table");
  if (!theta.allFinite()) throw std::invalid_argument("sampling needs a finite parameter vector");
  check_table_matches(*table_, model_, attrs_);
  const Eigen::VectorXd p = row_probabilities(theta, *table_);
  cumulative_.resize(static_cast<std::size_t>(p.size()));
  double acc = 0.0;
  for (Eigen::Index r = 0; r < p.size(); ++r) {
    acc += p[r];
    cumulative_[static_cast<std::size_t>(r)] = acc;
  }
  cumulative_.back() = 1.0;
}

std::vector<Eigen::Index> ExactSampler::draw_rows(std::size_t count, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::Index> rows(count);
  for (auto& r : rows) {
    const double u = unif(rng);
    r = std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
    if (r >= table_->rows()) r = table_->rows() - 1;
  }
  return rows;
}

std::vector<Graph> ExactSampler::draw(std::size_t count, std::mt19937_64& rng) const {
  const int n = table_->meta().n;
  const bool directed = table_->meta().directed;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct Target {
    std::uint64_t j;
    std::size_t draw;
  };
  std::vector<Eigen::Index> rows(count);
  std::vector<std::uint64_t> picks(count);
  for (std::size_t d = 0; d < count; ++d) {
    const double u = unif(rng);
    Eigen::Index r = std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
    if (r >= table_->rows()) r = table_->rows() - 1;
    rows[d] = r;
    std::uniform_int_distribution<std::uint64_t> pick(0, table_->weights()[r] - 1);
    picks[d] = pick(rng);
  }

  std::vector<Graph> out(count, Graph(n, directed));
  if (index_) {
    for (std::size_t d = 0; d < count; ++d) {
      out[d] = Graph::from_index(index_->graph(rows[d], picks[d]), n, directed);
    }
    return out;
  }

  // One streaming pass: the c-th graph seen in row r serves every draw
  // that picked (r, c).
  std::vector<std::vector<Target>> pending(static_cast<std::size_t>(table_->rows()));
  for (std::size_t d = 0; d < count; ++d) pending[rows[d]].push_back({picks[d], d});
  for (auto& v : pending) {
    std::sort(v.begin(), v.end(), [](const Target& a, const Target& b) { return a.j < b.j; });
  }
  std::vector<std::size_t> next(pending.size(), 0);
  std::vector<std::uint64_t> seen(pending.size(), 0);
  std::size_t remaining = count;
  if (remaining == 0) return out;
  label_support(*table_, model_, attrs_, [&](const Graph& g, Eigen::Index row) {
    const auto r = static_cast<std::size_t>(row);
    auto& targets = pending[r];
    const std::uint64_t c = seen[r]++;
    while (next[r] < targets.size() && targets[next[r]].j == c) {
      out[targets[next[r]].draw] = g;
      ++next[r];
      --remaining;
    }
    return remaining > 0;
  });
  if (remaining != 0) throw std::logic_error("streaming sampler left draws unresolved");
  return out;
}

std::vector<Graph> sample_graphs(const Eigen::VectorXd& theta, const ModelSpec& model, int n,
                                 bool directed, const AttributeTable& attrs, std::size_t count,
                                 std::uint64_t seed, TableCache& cache) {
  check_size(n, directed);
  if (!theta.allFinite()) throw std::invalid_argument("sampling needs a finite parameter vector");
  if (theta.size() != static_cast<Eigen::Index>(model.size())) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, model has " + std::to_string(model.size()) + " terms");
  }
  const ExactSampler sampler(cache.get(n, directed, model, attrs), model, attrs, theta);
  std::mt19937_64 rng(seed);
  return sampler.draw(count, rng);
}

NetworkSample regenerate_fivenets(std::uint64_t seed, TableCache& cache) {
  const ModelSpec model = parse_formula("edges + nodematch(gender)");
  Eigen::VectorXd theta(2);
  theta << -2.0, 2.0;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  NetworkSample out;
  for (int i = 0; i < 5; ++i) {
    Network net{std::to_string(i + 1), Graph(4, true), AttributeTable(4)};
    std::vector<double> gender(4);
    for (auto& v : gender) v = coin(rng) ? 1.0 : 0.0;
    net.attributes.set("gender", gender);
    out.push_back(std::move(net));
  }
  for (auto& net : out) {
    const ExactSampler sampler(cache.get(4, true, model, net.attributes), model, net.attributes, theta);
    net.graph = sampler.draw(1, rng).front();
  }
  return out;
}

Eigen::MatrixXd observed_statistics(const NetworkSample& sample, const ModelSpec& model) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(model.size()));
  for (std::size_t p = 0; p < sample.size(); ++p) {
    const auto s = eval_stats(model, sample[p].graph, sample[p].attributes);
    for (std::size_t j = 0; j < s.size(); ++j) {
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = s[j];
    }
  }
  return out;
}

bool boundary_filter(const PooledData& data) {
  const auto b = check_boundary(data);
  return std::all_of(b.begin(), b.end(), [](Boundary x) { return x == Boundary::interior; });
}

bool boundary_filter(const NetworkSample& sample, const ModelSpec& model, TableCache& cache) {
  return boundary_filter(make_pooled_data(sample, model, cache));
}

// ---------------------------------------------------------------------------
// Study harness

namespace {

bool uses_attributes(const ModelSpec& model) {
  for (const auto& t : model.terms) {
    if (base_needs_attribute(t.base)) return true;
  }
  for (const auto& o : model.offsets) {
    if (base_needs_attribute(o.term.base)) return true;
  }
  return false;
}

json config_to_json(const StudyConfig& c) {
  return json{{"name", c.name},
              {"replications", c.replications},
              {"theta_low", c.theta_low},
              {"theta_high", c.theta_high},
              {"sample_sizes", c.sample_sizes},
              {"small_n", c.small_n},
              {"large_n", c.large_n},
              {"directed", c.directed},
              {"generating_model", c.generating_model},
              {"fitting_model", c.fitting_model},
              {"level", c.level},
              {"seed", c.seed},
              {"bin_edges", c.bin_edges}};
}

}  // namespace

void StudyConfig::validate() const {
  if (replications <= 0) throw std::invalid_argument("replications must be positive");
  if (sample_sizes.empty()) throw std::invalid_argument("sample-size grid is empty");
  for (int s : sample_sizes) {
    if (s <= 0) throw std::invalid_argument("sample sizes must be positive");
  }
  if (!(level > 0 && level < 1)) throw std::invalid_argument("level must lie in (0, 1)");
  if (!(theta_low >= 0 && theta_low < theta_high)) {
    throw std::invalid_argument("parameter law needs 0 <= theta_low < theta_high");
  }
  if (bin_edges.size() < 2 || !std::is_sorted(bin_edges.begin(), bin_edges.end())) {
    throw std::invalid_argument("bin edges must be at least two ascending values");
  }
  check_size(small_n, directed);
  check_size(large_n, directed);
  const ModelSpec gen = parse_formula(generating_model);
  const ModelSpec fit = parse_formula(fitting_model);
  gen.validate();
  fit.validate();
  if (uses_attributes(gen) || uses_attributes(fit)) {
    throw std::invalid_argument("study models cannot reference node attributes");
  }
}

std::string study_config_to_json(const StudyConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

StudyConfig study_config_from_json(std::string_view text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("study config must be a JSON object");
  StudyConfig c;
  if (j.contains("preset")) {
    const auto preset = j["preset"].get<std::string>();
    if (preset == "power") {
      c = power_study_config(j.value("full_scale", false));
    } else if (preset == "type_one") {
      c = type_one_study_config(j.value("full_scale", false));
    } else {
      throw std::invalid_argument("unknown study preset '" + preset + "'");
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset" || key == "full_scale") continue;
    if (key == "name") c.name = value.get<std::string>();
    else if (key == "replications") c.replications = value.get<int>();
    else if (key == "theta_low") c.theta_low = value.get<double>();
    else if (key == "theta_high") c.theta_high = value.get<double>();
    else if (key == "sample_sizes") c.sample_sizes = value.get<std::vector<int>>();
    else if (key == "small_n") c.small_n = value.get<int>();
    else if (key == "large_n") c.large_n = value.get<int>();
    else if (key == "directed") c.directed = value.get<bool>();
    else if (key == "generating_model") c.generating_model = value.get<std::string>();
    else if (key == "fitting_model") c.fitting_model = value.get<std::string>();
    else if (key == "level") c.level = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "bin_edges") c.bin_edges = value.get<std::vector<double>>();
    else if (key == "threads") c.threads = value.get<unsigned>();
    else throw std::invalid_argument("unknown study config field '" + key + "'");
  }
  c.validate();
  return c;
}

std::string StudyConfig::fingerprint() const {
  return sha256_hex(config_to_json(*this).dump());
}

StudyConfig power_study_config(bool full_scale) {
  StudyConfig c;
  c.name = "power";
  c.replications = full_scale ? 20000 : 2000;
  return c;
}

StudyConfig type_one_study_config(bool full_scale) {
  StudyConfig c;
  c.name = "type_one";
  c.replications = full_scale ? 35000 : 3500;
  c.sample_sizes = {5, 10, 15, 20, 30, 50, 100};
  c.generating_model = "edges";
  c.fitting_model = "edges + ttriad";
  return c;
}

bool ReplicationRecord::usable() const {
  return kept && !failed && (status == "00" || status == "10");
}

std::string record_to_json(const ReplicationRecord& r) {
  json j{{"replication", r.replication},
         {"seed", r.seed},
         {"sample_size", r.sample_size},
         {"n_small", r.n_small},
         {"n_large", r.n_large},
         {"theta_true", detail::vector(r.theta_true)},
         {"kept", r.kept},
         {"failed", r.failed},
         {"error", r.error},
         {"status", r.status},
         {"estimate", detail::vector(r.estimate)},
         {"std_error", detail::vector(r.std_error)},
         {"p_value", detail::vector(r.p_value)},
         {"seconds", r.seconds}};
  return j.dump();
}

ReplicationRecord record_from_json(const std::string& line) {
  const json j = json::parse(line);
  ReplicationRecord r;
  r.replication = j.at("replication").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sample_size = j.at("sample_size").get<int>();
  r.n_small = j.at("n_small").get<int>();
  r.n_large = j.at("n_large").get<int>();
  r.theta_true = detail::vector(j.at("theta_true"));
  r.kept = j.at("kept").get<bool>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.estimate = detail::vector(j.at("estimate"));
  r.std_error = detail::vector(j.at("std_error"));
  r.p_value = detail::vector(j.at("p_value"));
  r.seconds = j.at("seconds").get<double>();
  return r;
}

StudyAggregates aggregate_study(const StudyConfig& config,
                                const std::vector<ReplicationRecord>& records) {
  const auto gen_names = parse_formula(config.generating_model).term_names();
  const auto fit_names = parse_formula(config.fitting_model).term_names();
  StudyAggregates out;
  for (const auto& r : records) {
    out.kept += r.kept ? 1 : 0;
    out.usable += r.usable() ? 1 : 0;
    out.failed += r.failed ? 1 : 0;
  }
  std::vector<int> sizes = config.sample_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  for (std::size_t fj = 0; fj < fit_names.size(); ++fj) {
    const auto it = std::find(gen_names.begin(), gen_names.end(), fit_names[fj]);
    const auto j = static_cast<Eigen::Index>(fj);
    if (it == gen_names.end()) {
      for (int size : sizes) {
        TypeOneRow row{fit_names[fj], size, 0, 0, 0.0};
        for (const auto& r : records) {
          if (!r.usable() || r.sample_size != size) continue;
          ++row.count;
          if (r.p_value[j] < config.level) ++row.rejected;
        }
        row.rate = row.count ? static_cast<double>(row.rejected) / row.count : 0.0;
        out.type_one.push_back(row);
      }
      continue;
    }
    const auto g = static_cast<Eigen::Index>(it - gen_names.begin());

    std::vector<double> diffs;
    for (const auto& r : records) {
      if (r.usable()) diffs.push_back(r.estimate[j] - r.theta_true[g]);
    }
    BiasRow bias{fit_names[fj], static_cast<int>(diffs.size()), 0.0, 0.0, 0.0, 0.0};
    if (!diffs.empty()) {
      double sum = 0.0;
      for (double d : diffs) sum += d;
      bias.mean = sum / static_cast<double>(diffs.size());
      double ss = 0.0;
      for (double d : diffs) ss += (d - bias.mean) * (d - bias.mean);
      bias.sd = diffs.size() > 1 ? std::sqrt(ss / static_cast<double>(diffs.size() - 1)) : 0.0;
      const double half = 1.959963984540054 * bias.sd / std::sqrt(static_cast<double>(diffs.size()));
      bias.ci_low = bias.mean - half;
      bias.ci_high = bias.mean + half;
    }
    out.bias.push_back(bias);

    for (int size : sizes) {
      for (std::size_t b = 0; b + 1 < config.bin_edges.size(); ++b) {
        const double lo = config.bin_edges[b];
        const double hi = config.bin_edges[b + 1];
        const bool last = b + 2 == config.bin_edges.size();
        PowerRow row{fit_names[fj], size, lo, hi, 0, 0, 0.0};
        for (const auto& r : records) {
          if (!r.usable() || r.sample_size != size) continue;
          const double mag = std::abs(r.theta_true[g]);
          if (mag < lo || (last ? mag > hi : mag >= hi)) continue;
          ++row.count;
          const bool same_sign = (r.estimate[j] > 0) == (r.theta_true[g] > 0);
          if (r.p_value[j] < config.level && same_sign) ++row.significant;
        }
        row.power = row.count ? static_cast<double>(row.significant) / row.count : 0.0;
        out.power.push_back(row);
      }
    }
  }
  return out;
}

std::string aggregates_to_csv(const StudyAggregates& a) {
  using detail::shortest;
  std::ostringstream out;
  out << "kind,term,sample_size,bin_low,bin_high,count,hits,value,ci_low,ci_high\n";
  for (const auto& b : a.bias) {
    out << "bias," << b.term << ",,,," << b.count << ",," << shortest(b.mean) << ','
        << shortest(b.ci_low) << ',' << shortest(b.ci_high) << '\n';
  }
  for (const auto& p : a.power) {
    out << "power," << p.term << ',' << p.sample_size << ',' << shortest(p.bin_low) << ','
        << shortest(p.bin_high) << ',' << p.count << ',' << p.significant << ','
        << shortest(p.power) << ",,\n";
  }
  for (const auto& t : a.type_one) {
    out << "type_one," << t.term << ',' << t.sample_size << ",,," << t.count << ',' << t.rejected
        << ',' << shortest(t.rate) << ",,\n";
  }
  return out.str();
}

namespace {

class StudyRunner {
 public:
  StudyRunner(const StudyConfig& config, TableCache& cache)
      : config_(config),
        gen_(parse_formula(config.generating_model)),
        fit_(parse_formula(config.fitting_model)),
        cache_(cache) {
    for (int n : {config.small_n, config.large_n}) {
      const AttributeTable none(n);
      auto table = cache.get(n, config.directed, gen_, none);
      std::shared_ptr<const RowIndex> index;
      if (cell_count(n, config.directed) <= RowIndex::kMaxCells) {
        index = std::make_shared<const RowIndex>(*table, gen_, none);
      }
      generators_.emplace(n, std::make_pair(table, index));
      // Warm the fitting tables too, so workers only read the cache.
      cache.get(n, config.directed, fit_, none);
    }
  }

  ReplicationRecord run(int r) const {
    const auto t0 = std::chrono::steady_clock::now();
    ReplicationRecord rec;
    rec.replication = r;
    rec.seed = split_seed(config_.seed, static_cast<std::uint64_t>(r));
    try {
      std::mt19937_64 rng(rec.seed);
      std::uniform_real_distribution<double> mag(config_.theta_low, config_.theta_high);
      std::bernoulli_distribution coin(0.5);
      rec.theta_true.resize(static_cast<Eigen::Index>(gen_.size()));
      for (Eigen::Index k = 0; k < rec.theta_true.size(); ++k) {
        const double m = mag(rng);
        rec.theta_true[k] = coin(rng) ? m : -m;
      }
      rec.sample_size = config_.sample_sizes[static_cast<std::size_t>(r) % config_.sample_sizes.size()];
      std::uniform_int_distribution<int> split(0, rec.sample_size);
      rec.n_large = split(rng);
      rec.n_small = rec.sample_size - rec.n_large;

      NetworkSample sample;
      for (auto [n, count] : {std::pair{config_.small_n, rec.n_small}, std::pair{config_.large_n, rec.n_large}}) {
        if (count == 0) continue;
        const auto& [table, index] = generators_.at(n);
        const AttributeTable none(n);
        const ExactSampler sampler(table, gen_, none, rec.theta_true, index);
        for (auto& g : sampler.draw(static_cast<std::size_t>(count), rng)) {
          sample.push_back({std::to_string(sample.size() + 1), std::move(g), none});
        }
      }
      const PooledData data = make_pooled_data(sample, fit_, cache_);
      rec.kept = boundary_filter(data);
      if (rec.kept) {
        const FitResult fit = fit_mle(data, fit_);
        rec.status = status_code(fit.status);
        const auto table = coefficient_table(fit);
        const auto k = static_cast<Eigen::Index>(table.size());
        rec.estimate.resize(k);
        rec.std_error.resize(k);
        rec.p_value.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) {
          rec.estimate[j] = table[j].estimate;
          rec.std_error[j] = table[j].std_error;
          rec.p_value[j] = table[j].p_value;
        }
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

 private:
  const StudyConfig& config_;
  ModelSpec gen_;
  ModelSpec fit_;
  TableCache& cache_;
  std::map<int, std::pair<std::shared_ptr<const StatTable>, std::shared_ptr<const RowIndex>>> generators_;
};

// Replication r depends only on the seed and r, so a checkpoint stays valid
// when a study is extended to more replications.
std::string checkpoint_key(const StudyConfig& config) {
  json j = config_to_json(config);
  j.erase("replications");
  return sha256_hex(j.dump());
}

std::map<int, ReplicationRecord> load_checkpoint(const std::filesystem::path& path,
                                                 const StudyConfig& config) {
  std::map<int, ReplicationRecord> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  if (!std::getline(in, line)) return done;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw std::runtime_error("checkpoint " + path.string() + " has an unreadable header");
  }
  if (header.value("config", std::string{}) != checkpoint_key(config)) {
    throw std::runtime_error("checkpoint " + path.string() +
                             " was written for a different study configuration");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto rec = record_from_json(line);
      if (rec.replication >= 0 && rec.replication < config.replications) {
        done[rec.replication] = std::move(rec);
      }
    } catch (const std::exception&) {
      // A torn final line from an interrupted run; that replication reruns.
    }
  }
  return done;
}

}  // namespace

StudyResult run_sim_study(const StudyConfig& config, TableCache& cache,
                          const std::optional<std::filesystem::path>& checkpoint) {
  config.validate();
  std::map<int, ReplicationRecord> done;
  std::ofstream sink;
  if (checkpoint) {
    done = load_checkpoint(*checkpoint, config);
    // Rewrite header and intact records so appends start on a clean line.
    const auto tmp = std::filesystem::path(checkpoint->string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << json{{"study", config.name}, {"config", checkpoint_key(config)}}.dump() << '\n';
      for (const auto& [r, rec] : done) out << record_to_json(rec) << '\n';
      if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, *checkpoint);
    sink.open(*checkpoint, std::ios::app);
    if (!sink) throw std::runtime_error("cannot append to checkpoint " + checkpoint->string());
  }

  const StudyRunner runner(config, cache);
  std::vector<int> todo;
  for (int r = 0; r < config.replications; ++r) {
    if (!done.contains(r)) todo.push_back(r);
  }
  std::vector<ReplicationRecord> fresh(todo.size());
  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      fresh[i] = runner.run(todo[i]);
      if (sink.is_open()) {
        const std::string line = record_to_json(fresh[i]);
        std::lock_guard lock(write_mutex);
        sink << line << '\n';
        sink.flush();
      }
    }
  };
  const unsigned threads = std::max(1u, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (auto& rec : fresh) done[rec.replication] = std::move(rec);
  StudyResult result;
  result.config = config;
  result.records.reserve(done.size());
  for (auto& [r, rec] : done) result.records.push_back(std::move(rec));
  result.aggregates = aggregate_study(config, result.records);
  return result;
}

}  // namespace exergm
