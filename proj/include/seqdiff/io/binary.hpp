#pragma once
// Little-endian binary primitives shared by the dataset container and the
// checkpoint format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "seqdiff/tensor.hpp"

namespace seqdiff::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("unexpected end of stream");
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::size_t limit = 1 << 20) {
  const auto n = get<std::uint32_t>(is);
  if (n > limit) throw FormatError("string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw FormatError("unexpected end of stream");
  return s;
}

template <class T>
void put_array(std::ostream& os, const T* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
void get_array(std::istream& is, T* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw FormatError("unexpected end of stream");
}

/// u64 rows, u64 cols, then rows*cols values.
template <class T>
void put_tensor(std::ostream& os, const Tensor<T>& t) {
  put<std::uint64_t>(os, t.rows());
  put<std::uint64_t>(os, t.cols());
  put_array(os, t.data(), t.size());
}

template <class T>
Tensor<T> get_tensor(std::istream& is) {
  const auto r = get<std::uint64_t>(is), c = get<std::uint64_t>(is);
  if (r * c > (std::uint64_t{1} << 34)) throw FormatError("tensor size out of range");
  Tensor<T> t(r, c);
  get_array(is, t.data(), t.size());
  return t;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

}  // namespace seqdiff::io
