#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "tdcrflow/common/error.hpp"

namespace tdcr::binio {

// Little-endian encoders, independent of host byte order.

template <class U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r |= ((v >> (8 * i)) & 0xff) << (8 * (sizeof(U) - 1 - i));
    return r;
  }
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32(std::ostream& os, float f) { write_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline void write_f64(std::ostream& os, double d) {
  auto v = to_le(std::bit_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void read_exact(std::istream& is, void* dst, std::size_t n, const std::string& what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("truncated " + what);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  std::uint32_t v;
  read_exact(is, &v, sizeof v, what);
  return to_le(v);
}

inline float read_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(read_u32(is, what));
}

inline double read_f64(std::istream& is, const std::string& what) {
  std::uint64_t v;
  read_exact(is, &v, sizeof v, what);
  return std::bit_cast<double>(to_le(v));
}

}  // namespace tdcr::binio
