#include "exergm/io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "exergm/formula.hpp"
#include "exergm/version.hpp"
#include "json_num.hpp"

namespace exergm {

namespace {

using json = nlohmann::ordered_json;

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void expect_format(const json& doc, const std::string& format, int version,
                   const std::string& source) {
  if (!doc.is_object()) throw FormatError(source + ": top level must be an object");
  if (doc.value("format", std::string{}) != format) {
    throw FormatError(source + ": \"format\" must be \"" + format + "\"");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != version) {
    throw FormatError(source + ": unsupported version (expected " + std::to_string(version) + ")");
  }
}

int as_index(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw FormatError(where + ": node index must be an integer");
  return v.get<int>();
}

Network parse_network(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": network must be an object");
  if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer())) {
    throw FormatError(where + ": missing \"id\"");
  }
  const std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  const std::string at = where + " (id '" + id + "')";
  if (!j.contains("n") || !j["n"].is_number_integer()) throw FormatError(at + ": missing integer \"n\"");
  if (!j.contains("directed") || !j["directed"].is_boolean()) {
    throw FormatError(at + ": missing boolean \"directed\"");
  }
  const int n = j["n"].get<int>();
  const bool directed = j["directed"].get<bool>();
  try {
    check_size(n, directed);
  } catch (const std::invalid_argument& e) {
    throw FormatError(at + ": " + e.what());
  }

  std::vector<std::pair<int, int>> ties;
  if (j.contains("ties") && j.contains("adjacency")) {
    throw FormatError(at + ": give either \"ties\" or \"adjacency\", not both");
  }
  if (j.contains("adjacency")) {
    const auto& a = j["adjacency"];
    if (!a.is_array() || static_cast<int>(a.size()) != n) {
      throw FormatError(at + ": adjacency must have " + std::to_string(n) + " rows");
    }
    for (int r = 0; r < n; ++r) {
      if (!a[r].is_array() || static_cast<int>(a[r].size()) != n) {
        throw FormatError(at + ": adjacency row " + std::to_string(r) + " must have " +
                          std::to_string(n) + " entries");
      }
      for (int c = 0; c < n; ++c) {
        const auto& v = a[r][c];
        if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
          throw FormatError(at + ": adjacency[" + std::to_string(r) + "][" + std::to_string(c) +
                            "] must be 0 or 1");
        }
        if (v.get<int>() == 0) continue;
        if (r == c) throw FormatError(at + ": self-tie at node " + std::to_string(r));
        if (!directed && a[c][r] != v) {
          throw FormatError(at + ": undirected adjacency is not symmetric at (" +
                            std::to_string(r) + ", " + std::to_string(c) + ")");
        }
        if (directed || r < c) ties.emplace_back(r, c);
      }
    }
  } else if (j.contains("ties")) {
    const auto& t = j["ties"];
    if (!t.is_array()) throw FormatError(at + ": \"ties\" must be a list of pairs");
    for (std::size_t e = 0; e < t.size(); ++e) {
      const std::string te = at + ": tie " + std::to_string(e);
      if (!t[e].is_array() || t[e].size() != 2) throw FormatError(te + " must be a pair");
      const int a = as_index(t[e][0], te);
      const int b = as_index(t[e][1], te);
      if (a < 0 || a >= n || b < 0 || b >= n) {
        throw FormatError(te + " [" + std::to_string(a) + ", " + std::to_string(b) +
                          "] out of range for n = " + std::to_string(n));
      }
      if (a == b) throw FormatError(te + " is a self-tie");
      ties.emplace_back(a, b);
    }
  }
  Network net{id, Graph::from_edges(n, directed, ties), AttributeTable(n)};
  if (j.contains("attributes")) {
    const auto& attrs = j["attributes"];
    if (!attrs.is_object()) throw FormatError(at + ": \"attributes\" must be an object");
    for (const auto& [name, values] : attrs.items()) {
      if (!values.is_array() || static_cast<int>(values.size()) != n) {
        throw FormatError(at + ": attribute '" + name + "' must have " + std::to_string(n) +
                          " values");
      }
      std::vector<double> v;
      for (const auto& x : values) {
        if (x.is_boolean()) {
          v.push_back(x.get<bool>() ? 1.0 : 0.0);
        } else if (x.is_number()) {
          v.push_back(x.get<double>());
        } else {
          throw FormatError(at + ": attribute '" + name + "' must be numeric");
        }
      }
      net.attributes.set(name, std::move(v));
    }
  }
  return net;
}

}  // namespace

NetworkSample parse_networks(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  expect_format(doc, "exergm-networks", kNetworkFormatVersion, source);
  if (!doc.contains("networks") || !doc["networks"].is_array()) {
    throw FormatError(source + ": missing \"networks\" list");
  }
  NetworkSample out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["networks"].size(); ++i) {
    Network net = parse_network(doc["networks"][i], source + ": network " + std::to_string(i));
    if (!ids.insert(net.id).second) {
      throw FormatError(source + ": duplicate network id '" + net.id + "'");
    }
    out.push_back(std::move(net));
  }
  if (out.empty()) throw FormatError(source + ": no networks");
  return out;
}

NetworkSample read_networks(const std::filesystem::path& path) {
  return parse_networks(read_text(path), path.string());
}

std::string networks_to_json(const NetworkSample& sample,
                             const std::map<std::string, std::string>& metadata) {
  json doc;
  doc["format"] = "exergm-networks";
  doc["version"] = kNetworkFormatVersion;
  if (!metadata.empty()) {
    json meta = json::object();
    for (const auto& [k, v] : metadata) meta[k] = v;
    doc["metadata"] = meta;
  }
  json nets = json::array();
  for (const auto& net : sample) {
    json ties = json::array();
    for (auto [a, b] : net.graph.edges()) ties.push_back({a, b});
    json j{{"id", net.id}, {"n", net.graph.n()}, {"directed", net.graph.directed()}, {"ties", ties}};
    if (!net.attributes.values().empty()) {
      json attrs = json::object();
      for (const auto& [name, values] : net.attributes.values()) attrs[name] = values;
      j["attributes"] = attrs;
    }
    nets.push_back(std::move(j));
  }
  doc["networks"] = nets;
  return doc.dump(2) + "\n";
}

void write_networks(const NetworkSample& sample, const std::filesystem::path& path,
                    const std::map<std::string, std::string>& metadata) {
  write_text(path, networks_to_json(sample, metadata));
}

NetworkSample parse_adjacency_text(std::string_view text, bool directed, const std::string& source) {
  std::vector<std::vector<std::vector<int>>> blocks(1);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream cells(line);
    std::vector<int> row;
    std::string tok;
    while (cells >> tok) {
      if (tok != "0" && tok != "1") {
        throw FormatError(source + ":" + std::to_string(line_no) + ": expected 0 or 1, got '" + tok + "'");
      }
      row.push_back(tok == "1");
    }
    if (row.empty()) {
      if (!blocks.back().empty()) blocks.emplace_back();
      continue;
    }
    blocks.back().push_back(std::move(row));
  }
  if (blocks.back().empty()) blocks.pop_back();
  if (blocks.empty()) throw FormatError(source + ": no adjacency matrices");

  NetworkSample out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& m = blocks[b];
    const int n = static_cast<int>(m.size());
    json j{{"id", std::to_string(b + 1)}, {"n", n}, {"directed", directed}, {"adjacency", m}};
    out.push_back(parse_network(j, source + ": matrix " + std::to_string(b + 1)));
  }
  return out;
}

std::string result_to_json(const FitResult& fit, const ResultContext& context) {
  json doc;
  doc["format"] = "exergm-result";
  doc["version"] = kResultFormatVersion;
  doc["engine"] = std::string("exergm ") + kVersion;
  doc["formula"] = fit.formula;
  doc["status"] = status_code(fit.status);
  doc["status_message"] = status_message(fit.status);
  doc["converged"] = fit.converged;
  doc["iterations"] = fit.iterations;
  doc["restarted"] = fit.restarted;
  doc["networks"] = context.networks;
  doc["n_obs"] = fit.n_obs;
  doc["loglik"] = detail::number(fit.loglik);
  doc["aic"] = detail::number(aic(fit));
  doc["bic"] = detail::number(bic(fit));
  json coefs = json::array();
  for (const auto& row : coefficient_table(fit)) {
    coefs.push_back({{"term", row.term},
                     {"estimate", detail::number(row.estimate)},
                     {"std_error", detail::number(row.std_error)},
                     {"z", detail::number(row.z)},
                     {"p_value", detail::number(row.p_value)},
                     {"boundary", boundary_name(row.boundary)}});
  }
  doc["coefficients"] = coefs;
  doc["theta_evaluated"] = detail::vector(fit.theta_evaluated);
  doc["has_vcov"] = fit.has_vcov;
  doc["vcov"] = detail::matrix(fit.vcov);
  doc["hessian"] = detail::matrix(fit.hessian);
  doc["gradient"] = detail::vector(fit.gradient);
  doc["data_fingerprint"] = fit.data_fingerprint;
  doc["table_keys"] = context.table_keys;
  json seeds = json::object();
  for (const auto& [k, v] : context.seeds) seeds[k] = v;
  doc["seeds"] = seeds;
  return doc.dump(2) + "\n";
}

FitResult result_from_json(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  expect_format(doc, "exergm-result", kResultFormatVersion, source);
  try {
    FitResult fit;
    fit.formula = doc.at("formula").get<std::string>();
    const ModelSpec model = parse_formula(fit.formula);
    fit.term_names = model.term_names();
    const auto& coefs = doc.at("coefficients");
    const auto k = static_cast<Eigen::Index>(coefs.size());
    if (k != static_cast<Eigen::Index>(fit.term_names.size())) {
      throw FormatError(source + ": coefficient count does not match the formula");
    }
    fit.theta.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& c = coefs[static_cast<std::size_t>(j)];
      if (c.at("term").get<std::string>() != fit.term_names[j]) {
        throw FormatError(source + ": coefficient " + std::to_string(j) + " names the wrong term");
      }
      fit.theta[j] = detail::number(c.at("estimate"));
      const auto b = c.at("boundary").get<std::string>();
      fit.boundary.push_back(b == "at_max" ? Boundary::at_max
                             : b == "at_min" ? Boundary::at_min
                                             : Boundary::interior);
    }
    fit.theta_evaluated = detail::vector(doc.at("theta_evaluated"));
    fit.has_vcov = doc.at("has_vcov").get<bool>();
    fit.vcov = detail::matrix(doc.at("vcov"));
    fit.hessian = detail::matrix(doc.at("hessian"));
    fit.gradient = detail::vector(doc.at("gradient"));
    fit.loglik = detail::number(doc.at("loglik"));
    fit.converged = doc.at("converged").get<bool>();
    fit.iterations = doc.at("iterations").get<int>();
    fit.restarted = doc.at("restarted").get<bool>();
    fit.n_obs = doc.at("n_obs").get<long>();
    fit.data_fingerprint = doc.at("data_fingerprint").get<std::string>();
    const int code = std::stoi(doc.at("status").get<std::string>());
    switch (code) {
      case 0: case 1: case 10: case 11: case 20: case 21: case 30:
        fit.status = static_cast<FitStatus>(code);
        break;
      default:
        throw FormatError(source + ": unknown status code");
    }
    if (fit.theta_evaluated.size() != k) throw FormatError(source + ": theta_evaluated has wrong length");
    return fit;
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed result file: " + e.what());
  }
}

FitResult read_result(const std::filesystem::path& path) {
  return result_from_json(read_text(path), path.string());
}

std::string boot_to_json(const BootResult& boot, const std::vector<std::string>& term_names) {
  json doc;
  doc["format"] = "exergm-bootstrap";
  doc["version"] = 1;
  doc["engine"] = std::string("exergm ") + kVersion;
  doc["terms"] = term_names;
  doc["seed"] = boot.seed;
  doc["requested"] = boot.requested;
  doc["failed"] = boot.failed;
  doc["vcov"] = detail::matrix(boot.vcov);
  json se = json::array();
  for (Eigen::Index j = 0; j < boot.vcov.rows(); ++j) se.push_back(std::sqrt(boot.vcov(j, j)));
  doc["std_error"] = se;
  doc["replicates"] = detail::matrix(boot.replicates);
  return doc.dump(2) + "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace exergm
