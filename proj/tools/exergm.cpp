#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "exergm/estimation.hpp"
#include "exergm/formula.hpp"
#include "exergm/inference.hpp"
#include "exergm/io.hpp"
#include "exergm/simulation.hpp"
#include "exergm/stat_table.hpp"
#include "exergm/version.hpp"

namespace fs = std::filesystem;
using namespace exergm;

namespace {

struct Common {
  unsigned threads = 0;
  std::string cache_dir;
  std::string out;
};

std::unique_ptr<TableCache> make_cache(const Common& c) {
  BuildOptions opts;
  opts.threads = c.threads;
  std::optional<fs::path> dir;
  if (!c.cache_dir.empty()) {
    fs::create_directories(c.cache_dir);
    dir = c.cache_dir;
  }
  auto cache = std::make_unique<TableCache>(dir, opts);
  cache->set_warning_sink([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
  return cache;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "seed: " << s << '\n';
  return s;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": '" + item + "' is not a number");
    }
  }
  return v;
}

// "name=v1,v2,..."
void add_attribute(AttributeTable& attrs, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("--attr expects name=v1,v2,...; got '" + spec + "'");
  }
  const auto values = parse_numbers(spec.substr(eq + 1), "--attr " + spec.substr(0, eq));
  if (static_cast<int>(values.size()) != attrs.n()) {
    throw std::invalid_argument("--attr " + spec.substr(0, eq) + " needs " +
                                std::to_string(attrs.n()) + " values");
  }
  attrs.set(spec.substr(0, eq), values);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void print_fit(const FitResult& fit, std::size_t networks) {
  std::cout << "formula: " << fit.formula << '\n'
            << "networks: " << networks << "  free cells: " << fit.n_obs << '\n'
            << "status: " << status_code(fit.status) << " (" << status_message(fit.status) << ")\n\n";
  std::cout << std::left << std::setw(32) << "term" << std::right << std::setw(12) << "estimate"
            << std::setw(12) << "std.error" << std::setw(10) << "z" << std::setw(12) << "p" << '\n';
  for (const auto& row : coefficient_table(fit)) {
    std::cout << std::left << std::setw(32) << row.term << std::right << std::setw(12)
              << format_number(row.estimate) << std::setw(12) << format_number(row.std_error)
              << std::setw(10) << format_number(row.z) << std::setw(12)
              << format_number(row.p_value) << '\n';
  }
  std::cout << "\nloglik " << format_number(fit.loglik) << "  AIC " << format_number(aic(fit))
            << "  BIC " << format_number(bic(fit)) << '\n';
}

NetworkSample load_sample(const std::string& path, bool adjacency_directed, bool adjacency) {
  if (adjacency) return parse_adjacency_text(read_text(path), adjacency_directed, path);
  return read_networks(path);
}

// Checks the networks against the fit's sample and rebuilds the pooled data.
PooledData data_for(const FitResult& fit, const NetworkSample& sample, TableCache& cache) {
  const ModelSpec model = parse_formula(fit.formula);
  PooledData data = make_pooled_data(sample, model, cache);
  if (data.fingerprint() != fit.data_fingerprint) {
    throw std::invalid_argument("networks differ from the sample the result was fitted on");
  }
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-likelihood ERGMs for small networks"};
  app.set_version_flag("--version", std::string("exergm ") + kVersion);
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--threads", common.threads, "Worker cap (0 = all cores)");
    sub->add_option("--cache-dir", common.cache_dir, "Directory for persisted support tables");
    sub->add_option("--out", common.out, "Output file (default: stdout)");
  };

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a pooled model by exact maximum likelihood");
  std::string fit_networks, fit_model, fit_init;
  bool adjacency = false;
  bool adjacency_directed = true;
  fit_cmd->add_option("networks", fit_networks, "Network file")->required();
  fit_cmd->add_option("--model", fit_model, "Model formula")->required();
  fit_cmd->add_option("--init", fit_init, "Starting values, comma separated");
  fit_cmd->add_flag("--adjacency", adjacency, "Input is plain-text adjacency matrices");
  fit_cmd->add_option("--directed", adjacency_directed, "Directedness of adjacency input");
  add_common(fit_cmd);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Draw networks exactly from a model");
  std::string sim_model, sim_theta;
  int sim_n = 4;
  bool sim_directed = true;
  int sim_count = 1;
  std::optional<std::uint64_t> sim_seed;
  std::vector<std::string> sim_attrs;
  bool fivenets = false;
  sim_cmd->add_option("--model", sim_model, "Model formula");
  sim_cmd->add_option("--theta", sim_theta, "Parameters, comma separated (use --theta=-2,2)");
  sim_cmd->add_option("--n", sim_n, "Nodes per network");
  sim_cmd->add_option("--directed", sim_directed, "Directed graphs (true/false)");
  sim_cmd->add_option("--count", sim_count, "Number of networks");
  sim_cmd->add_option("--seed", sim_seed, "Random seed");
  sim_cmd->add_option("--attr", sim_attrs, "Node attribute name=v1,v2,... (repeatable)");
  sim_cmd->add_flag("--fivenets", fivenets,
                    "Five 4-node networks from edges + nodematch(gender) at (-2, 2)");
  add_common(sim_cmd);

  // gof
  auto* gof_cmd = app.add_subcommand("gof", "Exact per-statistic goodness-of-fit intervals");
  std::string gof_result, gof_networks;
  double gof_level = 0.9;
  gof_cmd->add_option("result", gof_result, "Result file from fit")->required();
  gof_cmd->add_option("networks", gof_networks, "Network file")->required();
  gof_cmd->add_option("--level", gof_level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  add_common(gof_cmd);

  // boot
  auto* boot_cmd = app.add_subcommand("boot", "Network-level bootstrap covariance");
  std::string boot_result, boot_networks;
  int boot_r = 1000;
  std::optional<std::uint64_t> boot_seed;
  boot_cmd->add_option("result", boot_result, "Result file from fit")->required();
  boot_cmd->add_option("networks", boot_networks, "Network file")->required();
  boot_cmd->add_option("--R", boot_r, "Replicates");
  boot_cmd->add_option("--seed", boot_seed, "Random seed");
  add_common(boot_cmd);

  // lrtest
  auto* lr_cmd = app.add_subcommand("lrtest", "Likelihood-ratio test of two nested fits");
  std::string lr_restricted, lr_full;
  lr_cmd->add_option("restricted", lr_restricted, "Result file of the smaller model")->required();
  lr_cmd->add_option("full", lr_full, "Result file of the larger model")->required();

  // sim-study
  auto* study_cmd = app.add_subcommand("sim-study", "Bias / power / type-I simulation study");
  std::string study_config_path, study_preset = "power";
  bool full_scale = false;
  std::optional<int> study_reps;
  std::optional<std::uint64_t> study_seed;
  study_cmd->add_option("config", study_config_path, "Study config (JSON)");
  study_cmd->add_option("--preset", study_preset, "power or type_one")
      ->check(CLI::IsMember({"power", "type_one"}));
  study_cmd->add_flag("--full-scale", full_scale, "Use the full replication counts");
  study_cmd->add_option("--replications", study_reps, "Override the replication count");
  study_cmd->add_option("--seed", study_seed, "Master seed");
  add_common(study_cmd);

  // enumerate
  auto* enum_cmd = app.add_subcommand("enumerate", "Build a support table and summarize it");
  std::string enum_model;
  int enum_n = 4;
  bool enum_directed = true;
  std::vector<std::string> enum_attrs;
  enum_cmd->add_option("--model", enum_model, "Model formula")->required();
  enum_cmd->add_option("--n", enum_n, "Nodes")->required();
  enum_cmd->add_option("--directed", enum_directed, "Directed graphs (true/false)");
  enum_cmd->add_option("--attr", enum_attrs, "Node attribute name=v1,v2,... (repeatable)");
  add_common(enum_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      const ModelSpec model = parse_formula(fit_model);
      const NetworkSample sample = load_sample(fit_networks, adjacency_directed, adjacency);
      const PooledData data = make_pooled_data(sample, model, cache);
      FitOptions opts;
      if (!fit_init.empty()) {
        const auto v = parse_numbers(fit_init, "--init");
        opts.initial = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      const FitResult fit = fit_mle(data, model, opts);
      ResultContext ctx;
      ctx.networks = sample.size();
      for (const auto& g : data.groups()) ctx.table_keys.push_back(g.table->meta().cache_key);
      if (!common.out.empty()) write_text(common.out, result_to_json(fit, ctx));
      print_fit(fit, sample.size());
      return 0;
    }

    if (*sim_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      const std::uint64_t seed = resolve_seed(sim_seed);
      NetworkSample sample;
      std::map<std::string, std::string> meta{{"seed", std::to_string(seed)}};
      if (fivenets) {
        sample = regenerate_fivenets(seed, cache);
        meta["generator"] = "fivenets";
        meta["model"] = "edges + nodematch(gender)";
        meta["theta"] = "-2,2";
      } else {
        if (sim_model.empty() || sim_theta.empty()) {
          throw std::invalid_argument("simulate needs --model and --theta (or --fivenets)");
        }
        const ModelSpec model = parse_formula(sim_model);
        const auto t = parse_numbers(sim_theta, "--theta");
        const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
        check_size(sim_n, sim_directed);
        if (sim_count < 1) throw std::invalid_argument("--count must be positive");
        AttributeTable attrs(sim_n);
        for (const auto& a : sim_attrs) add_attribute(attrs, a);
        const auto graphs = sample_graphs(theta, model, sim_n, sim_directed, attrs,
                                          static_cast<std::size_t>(sim_count), seed, cache);
        for (std::size_t i = 0; i < graphs.size(); ++i) {
          sample.push_back({std::to_string(i + 1), graphs[i], attrs});
        }
        meta["model"] = print_formula(model);
        meta["theta"] = sim_theta;
      }
      emit(common.out, networks_to_json(sample, meta));
      return 0;
    }

    if (*gof_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      const FitResult fit = read_result(gof_result);
      const PooledData data = data_for(fit, read_networks(gof_networks), cache);
      const GofReport report = gof_exact(fit, data, 1.0 - gof_level);
      const bool csv = fs::path(common.out).extension() == ".csv";
      emit(common.out, csv ? gof_to_csv(report) : gof_to_json(report) + "\n");
      std::cerr << "coverage: " << report.coverage() << " over " << report.rows.size() << " intervals\n";
      return 0;
    }

    if (*boot_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      const FitResult fit = read_result(boot_result);
      const PooledData data = data_for(fit, read_networks(boot_networks), cache);
      BootOptions opts;
      opts.replicates = boot_r;
      opts.seed = resolve_seed(boot_seed);
      opts.threads = common.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : common.threads;
      const BootResult boot = bootstrap(data, parse_formula(fit.formula), opts);
      emit(common.out, boot_to_json(boot, fit.term_names));
      return 0;
    }

    if (*lr_cmd) {
      const FitResult restricted = read_result(lr_restricted);
      const FitResult full = read_result(lr_full);
      const LrTest t = lr_test(restricted, full);
      std::cout << "LR statistic " << format_number(t.statistic) << "  df " << t.df << "  p "
                << format_number(t.p_value) << '\n';
      return 0;
    }

    if (*study_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      StudyConfig config = study_config_path.empty()
                               ? (study_preset == "type_one" ? type_one_study_config(full_scale)
                                                             : power_study_config(full_scale))
                               : study_config_from_json(read_text(study_config_path));
      if (study_reps) config.replications = *study_reps;
      if (study_seed) config.seed = *study_seed;
      config.threads = common.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : common.threads;
      std::optional<fs::path> checkpoint;
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        checkpoint = fs::path(common.out) / "records.jsonl";
        write_text(fs::path(common.out) / "config.json", study_config_to_json(config));
      }
      const StudyResult result = run_sim_study(config, cache, checkpoint);
      const std::string csv = aggregates_to_csv(result.aggregates);
      if (checkpoint) {
        write_text(fs::path(common.out) / "aggregates.csv", csv);
      } else {
        std::cout << csv;
      }
      std::cerr << "replications " << result.records.size() << ", kept " << result.aggregates.kept
                << ", usable " << result.aggregates.usable << ", failed "
                << result.aggregates.failed << '\n';
      return 0;
    }

    if (*enum_cmd) {
      const auto cache_ptr = make_cache(common);
      TableCache& cache = *cache_ptr;
      const ModelSpec model = parse_formula(enum_model);
      AttributeTable attrs(enum_n);
      for (const auto& a : enum_attrs) add_attribute(attrs, a);
      const auto table = cache.get(enum_n, enum_directed, model, attrs);
      std::ostringstream out;
      out << "formula: " << table->meta().formula << '\n'
          << "n: " << enum_n << (enum_directed ? " directed" : " undirected") << '\n'
          << "rows: " << table->rows() << '\n'
          << "total weight: " << table->total_weight() << '\n'
          << "excluded graphs: " << table->meta().excluded_graphs << '\n'
          << "cache key: " << table->meta().cache_key << '\n';
      const auto bounds = table_bounds(*table);
      const auto names = model.term_names();
      for (std::size_t j = 0; j < names.size(); ++j) {
        out << "bounds " << names[j] << ": " << format_number(bounds[j].first) << " "
            << format_number(bounds[j].second) << '\n';
      }
      emit(common.out, out.str());
      return 0;
    }
  } catch (const FormulaError& e) {
    std::cerr << "error: formula: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
