#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mkg/error.hpp"

// Little-endian primitives shared by the checkpoint and index formats.
namespace mkg::xmodal::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

inline void put_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  out.write(reinterpret_cast<const char*>(&f), 4);
}

inline void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void need(std::istream& in, ErrorCode code, const char* what) {
  if (!in) throw Error(code, std::string("truncated file while reading ") + what);
}

inline std::uint32_t get_u32(std::istream& in, ErrorCode code, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  need(in, code, what);
  return v;
}

inline double get_f32(std::istream& in, ErrorCode code, const char* what) {
  float f = 0;
  in.read(reinterpret_cast<char*>(&f), 4);
  need(in, code, what);
  return f;
}

inline std::string get_str(std::istream& in, ErrorCode code, const char* what, std::uint32_t limit = 1u << 26) {
  const std::uint32_t n = get_u32(in, code, what);
  if (n > limit) throw Error(code, std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  need(in, code, what);
  return s;
}

}  // namespace mkg::xmodal::binio
