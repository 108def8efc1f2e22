#pragma once

// Little-endian primitive encoding shared by the graph snapshot and the
// checkpoint format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hehr/errors.hpp"

namespace hehr::binio {

template <typename UInt>
void put_uint(std::ostream& out, UInt value) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

template <typename UInt>
UInt get_uint(std::istream& in) {
  unsigned char buf[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(UInt))) {
    throw FormatError("unexpected end of binary input");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(buf[i]) << (8 * i);
  }
  return value;
}

inline void put_f64(std::ostream& out, double v) {
  put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

inline double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_uint<std::uint64_t>(in));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t limit = 1u << 26) {
  const auto n = get_uint<std::uint32_t>(in);
  if (n > limit) throw FormatError("string length exceeds limit");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw FormatError("unexpected end of binary input");
  return s;
}

inline void put_u32_list(std::ostream& out, const std::vector<std::uint32_t>& v) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  for (auto x : v) put_uint<std::uint32_t>(out, x);
}

inline std::vector<std::uint32_t> get_u32_list(std::istream& in, std::size_t limit = 1u << 30) {
  const auto n = get_uint<std::uint32_t>(in);
  if (n > limit) throw FormatError("list length exceeds limit");
  std::vector<std::uint32_t> v;
  v.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(get_uint<std::uint32_t>(in));
  return v;
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic) {
    throw FormatError("bad magic, expected '" + magic + "'");
  }
}

}  // namespace hehr::binio
