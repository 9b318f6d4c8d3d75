#pragma once

// URK1: a flat list of named float64 arrays.
//
//   "URK1" | u32 count | count × { u16 name_len | name | u8 ndims | ndims × u64 dim | f64 payload }
//
// All integers and floats little-endian; payload row-major. Scalars are 1x1 arrays.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "unroll/error.hpp"
#include "unroll/matrix.hpp"

namespace unroll {

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  bool operator==(const NamedArray& o) const {
    if (name != o.name || dims != o.dims || data.size() != o.data.size()) return false;
    // bitwise, so that NaN payloads and signed zeros compare as stored
    return data.empty() || std::memcmp(data.data(), o.data.data(), data.size() * sizeof(double)) == 0;
  }
};

class Container {
 public:
  /// Arrays in insertion order.
  const std::vector<NamedArray>& arrays() const noexcept { return arrays_; }
  std::size_t size() const noexcept { return arrays_.size(); }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  void put(NamedArray a) {
    if (a.name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("array name too long");
    if (a.dims.size() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("too many dimensions");
    std::uint64_t count = 1;
    for (auto d : a.dims) count *= d;
    if (count != a.data.size()) throw ShapeError("container: payload length does not match dims of '" + a.name + "'");
    if (contains(a.name)) throw FormatError("duplicate array name '" + a.name + "'");
    arrays_.push_back(std::move(a));
  }

  void put(const std::string& name, const Matrix& m) {
    put(NamedArray{name, {m.rows(), m.cols()}, std::vector<double>(m.values().begin(), m.values().end())});
  }

  void put_scalar(const std::string& name, double v) { put(NamedArray{name, {1, 1}, {v}}); }

  const NamedArray& at(std::string_view name) const {
    const NamedArray* a = find(name);
    if (a == nullptr) throw FormatError("missing array '" + std::string(name) + "'");
    return *a;
  }

  /// 2-D view of an array; 1-D arrays become columns.
  Matrix matrix(std::string_view name) const {
    const NamedArray& a = at(name);
    if (a.dims.size() > 2) throw FormatError("array '" + a.name + "' is not 2-D");
    const std::size_t rows = a.dims.empty() ? 1 : a.dims[0];
    const std::size_t cols = a.dims.size() < 2 ? 1 : a.dims[1];
    return Matrix(rows, cols, a.data);
  }

  double scalar(std::string_view name) const {
    const NamedArray& a = at(name);
    if (a.data.size() != 1) throw FormatError("array '" + a.name + "' is not a scalar");
    return a.data[0];
  }

  bool operator==(const Container& o) const { return arrays_ == o.arrays_; }

 private:
  const NamedArray* find(std::string_view name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return &a;
    return nullptr;
  }

  std::vector<NamedArray> arrays_;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated container while reading ") + what + " at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_container(const Container& c) {
  std::string out = "URK1";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.size()));
  for (const auto& a : c.arrays()) {
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
    out += a.name;
    out.push_back(static_cast<char>(a.dims.size()));
    for (auto d : a.dims) detail::put_le<std::uint64_t>(out, d);
    for (double v : a.data) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Container parse_container(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.take(4, "magic") != "URK1") throw FormatError("bad magic: not a URK1 container");
  const auto count = r.get<std::uint32_t>("array count");
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(r.take(name_len, "name"));
    const auto ndims = r.get<std::uint8_t>("dimension count");
    NamedArray a{std::move(name), {}, {}};
    std::uint64_t elems = 1;
    for (std::uint8_t d = 0; d < ndims; ++d) {
      const auto dim = r.get<std::uint64_t>("dims");
      if (dim != 0 && elems > std::numeric_limits<std::uint64_t>::max() / dim) {
        throw FormatError("array '" + a.name + "' dims overflow");
      }
      elems *= dim;
      a.dims.push_back(dim);
    }
    if (elems > r.remaining() / sizeof(double)) {
      throw FormatError("truncated container: payload of '" + a.name + "' exceeds the remaining bytes");
    }
    a.data.resize(elems);
    for (auto& v : a.data) v = std::bit_cast<double>(r.get<std::uint64_t>("payload"));
    if (c.contains(a.name)) throw FormatError("duplicate array name '" + a.name + "'");
    c.put(std::move(a));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last array");
  return c;
}

inline void save_container(const std::string& path, const Container& c) {
  const std::string bytes = serialize_container(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write to '" + path + "' failed");
}

inline Container load_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace unroll
