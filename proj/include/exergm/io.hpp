#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exergm/estimation.hpp"
#include "exergm/graph.hpp"
#include "exergm/inference.hpp"

namespace exergm {

inline constexpr int kNetworkFormatVersion = 1;
inline constexpr int kResultFormatVersion = 1;

/// Malformed input file. The message names the file and the offending entry.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network file (JSON):
///   {"format": "exergm-networks", "version": 1, "metadata": {...},
///    "networks": [{"id": "a", "n": 4, "directed": true,
///                  "ties": [[0, 1], [2, 3]],
///                  "attributes": {"gender": [0, 1, 1, 0]}}]}
/// A network may give "adjacency" (n x n 0/1 rows) instead of "ties".
NetworkSample parse_networks(std::string_view text, const std::string& source = "<input>");
NetworkSample read_networks(const std::filesystem::path& path);

std::string networks_to_json(const NetworkSample& sample,
                             const std::map<std::string, std::string>& metadata = {});
void write_networks(const NetworkSample& sample, const std::filesystem::path& path,
                    const std::map<std::string, std::string>& metadata = {});

/// Whitespace separated 0/1 matrices, one per block, blocks separated by
/// blank lines; networks get ids "1", "2", ...
NetworkSample parse_adjacency_text(std::string_view text, bool directed,
                                   const std::string& source = "<input>");

struct ResultContext {
  std::vector<std::string> table_keys;
  std::map<std::string, std::uint64_t> seeds;
  std::size_t networks = 0;
};

/// Result file (JSON) with the formula, coefficient table, loglik, AIC,
/// BIC, status, covariance, table keys, seeds and engine version.
/// Infinite estimates are written as "Inf" / "-Inf". No timestamps, so
/// equal inputs give byte-identical files.
std::string result_to_json(const FitResult& fit, const ResultContext& context = {});
/// Restores the FitResult (estimates, covariance, status) from a result file.
FitResult result_from_json(std::string_view text, const std::string& source = "<input>");
FitResult read_result(const std::filesystem::path& path);

std::string boot_to_json(const BootResult& boot, const std::vector<std::string>& term_names);

std::string read_text(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace exergm
