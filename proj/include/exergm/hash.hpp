#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace exergm {

/// Incremental SHA-256 (OpenSSL EVP) producing lowercase hex digests.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(const void* data, std::size_t size);
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  Sha256& value(T v) {
    return update(&v, sizeof(v));
  }

  std::string hex();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view data);

/// SplitMix64 step; used to derive independent per-task seeds from a
/// master seed: seed_i = split_seed(master, i).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

}  // namespace exergm
