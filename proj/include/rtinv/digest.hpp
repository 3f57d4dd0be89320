#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "rtinv/types.hpp"

namespace rtinv {

/// 64-bit FNV-1a over the raw bytes of the values fed to it. Used to bind a
/// prepared artifact to the operator and constraints it came from; not a
/// cryptographic hash.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t len);
  void add(double v) { add_bytes(&v, sizeof v); }
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  void add(std::span<const double> v);
  void add(const Matrix& m);
  void add(const Vector& v);
  void add(std::string_view s) { add_bytes(s.data(), s.size()); }
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex_digest(std::uint64_t v);
std::uint64_t parse_hex_digest(const std::string& s);

}  // namespace rtinv
