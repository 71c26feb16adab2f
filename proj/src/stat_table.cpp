#include "exergm/stat_table.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "exergm/formula.hpp"
#include "exergm/hash.hpp"

namespace exergm {

namespace {

constexpr std::uint32_t kTableFormatVersion = 1;
constexpr char kTableMagic[8] = {'E', 'X', 'G', 'M', 'T', 'B', 'L', '1'};

std::uint64_t mix(std::uint64_t h) {
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

/// Open-addressing hash aggregate over fixed-width double keys compared by
/// bit pattern.
class RowAggregator {
 public:
  RowAggregator(std::size_t width, std::size_t max_rows)
      : width_(width), max_rows_(max_rows), slots_(1024, -1) {}

  void add(const double* key, std::uint64_t count) {
    if ((size() + 1) * 2 > slots_.size()) grow();
    const std::size_t slot = probe(key);
    if (slots_[slot] >= 0) {
      counts_[slots_[slot]] += count;
      return;
    }
    if (size() >= max_rows_) {
      throw std::length_error(
          "distinct statistic rows exceed the configured memory cap (" +
          std::to_string(max_rows_) + " rows per worker); raise the memory cap");
    }
    slots_[slot] = static_cast<std::int64_t>(counts_.size());
    keys_.insert(keys_.end(), key, key + width_);
    counts_.push_back(count);
  }

  std::size_t size() const { return counts_.size(); }
  const double* key(std::size_t r) const { return keys_.data() + r * width_; }
  std::uint64_t count(std::size_t r) const { return counts_[r]; }

 private:
  std::uint64_t hash(const double* key) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::size_t i = 0; i < width_; ++i) h = mix(h ^ std::bit_cast<std::uint64_t>(key[i]));
    return h;
  }

  bool same(const double* a, const double* b) const {
    return std::memcmp(a, b, width_ * sizeof(double)) == 0;
  }

  std::size_t probe(const double* key) const {
    const std::size_t mask = slots_.size() - 1;
    std::size_t s = hash(key) & mask;
    while (slots_[s] >= 0 && !same(this->key(slots_[s]), key)) s = (s + 1) & mask;
    return s;
  }

  void grow() {
    std::vector<std::int64_t> old(slots_.size() * 2, -1);
    slots_.swap(old);
    for (std::size_t r = 0; r < counts_.size(); ++r) slots_[probe(key(r))] = static_cast<std::int64_t>(r);
  }

  std::size_t width_;
  std::size_t max_rows_;
  std::vector<std::int64_t> slots_;
  std::vector<double> keys_;
  std::vector<std::uint64_t> counts_;
};

bool lex_less(const double* a, const double* b, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return false;
}

std::set<std::string> referenced_attributes(const ModelSpec& model) {
  std::set<std::string> out;
  auto visit = [&](const TermSpec& t) {
    if (base_needs_attribute(t.base)) out.insert(t.attribute);
  };
  for (const auto& t : model.terms) visit(t);
  for (const auto& o : model.offsets) visit(o.term);
  return out;
}

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_string(std::string& buf, const std::string& s) {
  put<std::uint64_t>(buf, s.size());
  buf += s;
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint64_t>();
    need(len);
    std::string s(data_.substr(at_, len));
    at_ += len;
    return s;
  }
  void need(std::size_t len) const {
    if (at_ + len > data_.size() || at_ + len < at_) throw std::runtime_error("table file truncated");
  }
  std::size_t at() const { return at_; }

 private:
  std::string_view data_;
  std::size_t at_ = 0;
};

}  // namespace

StatTable::StatTable(TableMeta meta, Eigen::MatrixXd q, std::vector<std::uint64_t> weights,
                     Eigen::VectorXd offsets)
    : meta_(std::move(meta)), q_(std::move(q)), weights_(std::move(weights)),
      offsets_(std::move(offsets)) {
  if (q_.rows() == 0) throw std::invalid_argument("statistic table has no rows");
  if (static_cast<Eigen::Index>(weights_.size()) != q_.rows() || offsets_.size() != q_.rows()) {
    throw std::invalid_argument("statistic table dimensions disagree");
  }
  log_weights_.resize(q_.rows());
  for (Eigen::Index r = 0; r < q_.rows(); ++r) {
    if (weights_[r] == 0) throw std::invalid_argument("statistic table row with zero weight");
    log_weights_[r] = std::log(static_cast<double>(weights_[r]));
  }
  min_.resize(q_.cols());
  max_.resize(q_.cols());
  for (Eigen::Index j = 0; j < q_.cols(); ++j) {
    min_[j] = q_.col(j).minCoeff();
    max_[j] = q_.col(j).maxCoeff();
  }
}

std::uint64_t StatTable::total_weight() const {
  return std::accumulate(weights_.begin(), weights_.end(), std::uint64_t{0});
}

std::optional<Eigen::Index> StatTable::find_row(std::span<const double> stats,
                                                double offset) const {
  if (static_cast<Eigen::Index>(stats.size()) != cols()) return std::nullopt;
  auto compare = [&](Eigen::Index r) {
    for (Eigen::Index j = 0; j < cols(); ++j) {
      if (q_(r, j) < stats[j]) return -1;
      if (q_(r, j) > stats[j]) return 1;
    }
    if (offsets_[r] < offset) return -1;
    if (offsets_[r] > offset) return 1;
    return 0;
  };
  Eigen::Index lo = 0, hi = rows();
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi) / 2;
    const int c = compare(mid);
    if (c == 0) return mid;
    if (c < 0) lo = mid + 1;
    else hi = mid;
  }
  return std::nullopt;
}

bool StatTable::operator==(const StatTable& other) const {
  return meta_ == other.meta_ && q_ == other.q_ && weights_ == other.weights_ &&
         offsets_ == other.offsets_;
}

StatTable build_table(int n, bool directed, const ModelSpec& model, const AttributeTable& attrs,
                      const BuildOptions& options) {
  model.validate();
  const ModelEvaluator eval(model, attrs, n, directed);
  const std::uint64_t total = support_size(n, directed);
  const std::size_t k = eval.size();
  const std::size_t width = k + 1;

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  if (total < (1u << 16)) threads = 1;
  const std::size_t row_bytes = width * sizeof(double) + sizeof(std::uint64_t) + 4 * sizeof(std::int64_t);
  const std::size_t max_rows = std::max<std::size_t>(1, options.memory_cap_bytes / threads / row_bytes);

  const auto ranges = partition_indices(total, threads);
  std::vector<RowAggregator> parts;
  parts.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) parts.emplace_back(width, max_rows);
  std::vector<std::uint64_t> excluded(threads, 0);
  std::vector<std::exception_ptr> errors(threads);

  auto work = [&](unsigned t) {
    try {
      const GraphDecoder decoder(n, directed);
      std::vector<double> key(width);
      for_each_graph(decoder, ranges[t], [&](const Graph& g) {
        const double off = eval.offset(g);
        if (off == -std::numeric_limits<double>::infinity()) {
          ++excluded[t];
          return;
        }
        eval.stats(g, std::span<double>(key.data(), k));
        key[k] = off;
        parts[t].add(key.data(), 1);
      });
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RowAggregator merged(width, std::numeric_limits<std::size_t>::max());
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < p.size(); ++r) merged.add(p.key(r), p.count(r));
  }
  const std::uint64_t dropped = std::accumulate(excluded.begin(), excluded.end(), std::uint64_t{0});
  if (merged.size() == 0) {
    throw std::invalid_argument("constraints exclude every graph of size " + std::to_string(n) +
                                "; the constrained support is empty");
  }

  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lex_less(merged.key(a), merged.key(b), width);
  });

  Eigen::MatrixXd q(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(k));
  std::vector<std::uint64_t> w(order.size());
  Eigen::VectorXd o(static_cast<Eigen::Index>(order.size()));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double* key = merged.key(order[r]);
    for (std::size_t j = 0; j < k; ++j) q(r, j) = key[j];
    o[r] = key[k];
    w[r] = merged.count(order[r]);
  }
  TableMeta meta{n, directed, print_formula(model), table_cache_key(n, directed, model, attrs),
                 total, dropped};
  return StatTable(std::move(meta), std::move(q), std::move(w), std::move(o));
}

std::vector<std::pair<double, double>> table_bounds(const StatTable& table) {
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index j = 0; j < table.cols(); ++j) out.emplace_back(table.column_min(j), table.column_max(j));
  return out;
}

std::string table_cache_key(int n, bool directed, const ModelSpec& model,
                            const AttributeTable& attrs) {
  Sha256 h;
  h.update("exergm-table|cell-order=").update(std::to_string(kCellOrderVersion));
  h.update("|n=").update(std::to_string(n));
  h.update(directed ? "|directed" : "|undirected");
  h.update("|formula=").update(print_formula(model));
  for (const auto& name : referenced_attributes(model)) {
    h.update("|attr=").update(name).update("=");
    for (double v : attrs.get(name)) h.value(std::bit_cast<std::uint64_t>(v + 0.0));
  }
  return h.hex();
}

void save_table(const StatTable& table, const std::filesystem::path& path) {
  std::string buf(kTableMagic, sizeof(kTableMagic));
  const auto& m = table.meta();
  put<std::uint32_t>(buf, kTableFormatVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(m.n));
  put<std::uint8_t>(buf, m.directed ? 1 : 0);
  put<std::uint64_t>(buf, m.total_graphs);
  put<std::uint64_t>(buf, m.excluded_graphs);
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(table.rows()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(table.cols()));
  put_string(buf, m.formula);
  put_string(buf, m.cache_key);
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) put<double>(buf, table.q()(r, j));
  }
  for (auto w : table.weights()) put<std::uint64_t>(buf, w);
  for (Eigen::Index r = 0; r < table.rows(); ++r) put<double>(buf, table.offsets()[r]);
  const std::string digest = sha256_hex(buf);
  buf += digest;

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write table file " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("cannot write table file " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

StatTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open table file " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t kDigest = 64;
  if (data.size() < sizeof(kTableMagic) + kDigest ||
      std::memcmp(data.data(), kTableMagic, sizeof(kTableMagic)) != 0) {
    throw std::runtime_error("not a statistic table file: " + path.string());
  }
  const std::string_view body(data.data(), data.size() - kDigest);
  if (sha256_hex(body) != std::string_view(data).substr(data.size() - kDigest)) {
    throw std::runtime_error("checksum mismatch in table file " + path.string());
  }
  Reader r(body.substr(sizeof(kTableMagic)));
  if (r.get<std::uint32_t>() != kTableFormatVersion) {
    throw std::runtime_error("unsupported table format version in " + path.string());
  }
  TableMeta meta;
  meta.n = static_cast<int>(r.get<std::uint32_t>());
  meta.directed = r.get<std::uint8_t>() != 0;
  meta.total_graphs = r.get<std::uint64_t>();
  meta.excluded_graphs = r.get<std::uint64_t>();
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  meta.formula = r.get_string();
  meta.cache_key = r.get_string();
  r.need(rows * cols * 8 + rows * 16);
  Eigen::MatrixXd q(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) = r.get<double>();
  }
  std::vector<std::uint64_t> w(rows);
  for (auto& x : w) x = r.get<std::uint64_t>();
  Eigen::VectorXd o(static_cast<Eigen::Index>(rows));
  for (Eigen::Index i = 0; i < o.size(); ++i) o[i] = r.get<double>();
  return StatTable(std::move(meta), std::move(q), std::move(w), std::move(o));
}

TableCache::TableCache(std::optional<std::filesystem::path> dir, BuildOptions options)
    : dir_(std::move(dir)), options_(options),
      warn_([](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

void TableCache::set_warning_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lock(mutex_);
  warn_ = std::move(sink);
}

std::size_t TableCache::size() const {
  std::lock_guard lock(mutex_);
  return tables_.size();
}

std::shared_ptr<const StatTable> TableCache::get(int n, bool directed, const ModelSpec& model,
                                                 const AttributeTable& attrs) {
  const std::string key = table_cache_key(n, directed, model, attrs);
  std::lock_guard lock(mutex_);
  if (auto it = tables_.find(key); it != tables_.end()) return it->second;

  std::shared_ptr<const StatTable> table;
  std::filesystem::path file;
  if (dir_) {
    file = *dir_ / (key + ".tbl");
    if (std::filesystem::exists(file)) {
      try {
        auto loaded = std::make_shared<const StatTable>(load_table(file));
        if (loaded->meta().cache_key == key) {
          table = std::move(loaded);
        } else {
          warn_("cache entry " + file.string() + " holds a different table; rebuilding");
        }
      } catch (const std::exception& e) {
        warn_(std::string(e.what()) + "; rebuilding");
      }
    }
  }
  if (!table) {
    table = std::make_shared<const StatTable>(build_table(n, directed, model, attrs, options_));
    ++builds_;
    if (dir_) save_table(*table, file);
  }
  tables_.emplace(key, table);
  return table;
}

}  // namespace exergm
