#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "vlab/error.hpp"

// Little-endian scalar encoding shared by the model and probe checkpoints and
// the embedding matrix file.
namespace vlab::binary {

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_f32(std::ostream& out, float v) { put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_f32(std::string& out, float v) {
  const auto u = to_le(std::bit_cast<std::uint32_t>(v));
  out.append(reinterpret_cast<const char*>(&u), 4);
}

inline float get_f32(const std::string& buf, std::size_t& pos) {
  std::uint32_t u;
  std::memcpy(&u, buf.data() + pos, 4);
  pos += 4;
  return std::bit_cast<float>(to_le(u));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorKind::Malformed,
          std::string("unexpected end of file while reading ") + what);
  return to_le(v);
}

inline float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get<std::uint32_t>(in, what)); }

inline std::string get_string(std::istream& in, const char* what, std::uint32_t max_len = 1u << 20) {
  const auto n = get<std::uint32_t>(in, what);
  require(n <= max_len, ErrorKind::Malformed, std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  require(in.gcount() == static_cast<std::streamsize>(n), ErrorKind::Malformed,
          std::string("unexpected end of file while reading ") + what);
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& file) {
  char got[4] = {};
  in.read(got, 4);
  require(in.gcount() == 4 && std::memcmp(got, magic, 4) == 0, ErrorKind::Malformed,
          file + ": bad magic, expected " + std::string(magic, 4));
}

}  // namespace vlab::binary
