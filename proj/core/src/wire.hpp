#pragma once

// Little-endian binary encoding helpers shared by the checkpoint and
// feature-file writers. Byte order is explicit so files are portable.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace lgn::wire {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline bool read_u32(std::istream& in, std::uint32_t& v) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return true;
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline bool read_f32(std::istream& in, float& v) {
  std::uint32_t bits;
  if (!read_u32(in, bits)) return false;
  std::memcpy(&v, &bits, 4);
  return true;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline bool read_f64(std::istream& in, double& v) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) return false;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  std::memcpy(&v, &bits, 8);
  return true;
}

}  // namespace lgn::wire
