#include "rtinv/digest.hpp"

#include <cstdio>
#include <cstdlib>

#include "rtinv/errors.hpp"

namespace rtinv {

void Fnv1a::add_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::add(std::span<const double> v) {
  add(static_cast<std::int64_t>(v.size()));
  add_bytes(v.data(), v.size_bytes());
}

void Fnv1a::add(const Matrix& m) {
  add(static_cast<std::int64_t>(m.rows()));
  add(static_cast<std::int64_t>(m.cols()));
  // row-major traversal so the value does not depend on storage order
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) add(m(i, j));
  }
}

void Fnv1a::add(const Vector& v) {
  add(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::string hex_digest(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex_digest(const std::string& s) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 16);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorCode::SchemaError, "malformed digest '" + s + "'");
  }
  return v;
}

}  // namespace rtinv
