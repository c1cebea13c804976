#pragma once

// Minimal reader/writer for NumPy .npy files (little-endian, C order).
// Supported dtypes: float32 ('<f4'), float64 ('<f8', converted on read),
// uint8 ('|u1').

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hierxai::npy {

static_assert(std::endian::native == std::endian::little, "npy I/O assumes a little-endian host");

enum class DType { f4, f8, u1 };

struct Array {
  DType dtype = DType::f4;
  std::vector<std::size_t> shape;
  std::vector<float> f32;        // filled for f4 and f8
  std::vector<std::uint8_t> u8;  // filled for u1

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

class NpyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kMagic[] = "\x93NUMPY";

inline std::string header_value(std::string_view header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string_view::npos) throw NpyError("npy header missing key " + std::string(key));
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw NpyError("malformed npy header");
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  if (pos >= header.size()) throw NpyError("malformed npy header");
  std::size_t end = pos;
  if (header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string_view::npos) throw NpyError("malformed npy header");
    return std::string(header.substr(pos + 1, end - pos - 1));
  }
  if (header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string_view::npos) throw NpyError("malformed npy header");
    return std::string(header.substr(pos, end - pos + 1));
  }
  end = header.find_first_of(",}", pos);
  return std::string(header.substr(pos, end - pos));
}

inline std::vector<std::size_t> parse_shape(const std::string& tuple) {
  std::vector<std::size_t> shape;
  std::string inner = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    try {
      shape.push_back(static_cast<std::size_t>(std::stoull(item.substr(b))));
    } catch (const std::exception&) {
      throw NpyError("bad npy shape entry: " + item);
    }
  }
  return shape;
}

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
    if (i + 1 < shape.size()) s += " ";
  }
  return s + ")";
}

}  // namespace detail

inline Array parse(std::string_view bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), detail::kMagic, 6) != 0) throw NpyError("not an npy file");
  const auto major = static_cast<std::uint8_t>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<std::uint8_t>(bytes[8]) | (static_cast<std::size_t>(static_cast<std::uint8_t>(bytes[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw NpyError("truncated npy header");
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 4);
    header_len = len;
    offset = 12;
  } else {
    throw NpyError("unsupported npy version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw NpyError("truncated npy header");
  const std::string_view header = bytes.substr(offset, header_len);
  const std::string descr = detail::header_value(header, "descr");
  const std::string fortran = detail::header_value(header, "fortran_order");
  if (fortran.find("True") != std::string::npos) throw NpyError("fortran-order npy arrays are not supported");

  Array arr;
  arr.shape = detail::parse_shape(detail::header_value(header, "shape"));
  std::size_t item = 0;
  if (descr == "<f4") {
    arr.dtype = DType::f4;
    item = 4;
  } else if (descr == "<f8") {
    arr.dtype = DType::f8;
    item = 8;
  } else if (descr == "|u1" || descr == "<u1" || descr == "|b1") {
    arr.dtype = DType::u1;
    item = 1;
  } else {
    throw NpyError("unsupported npy dtype " + descr);
  }
  const std::size_t n = arr.count();
  const std::size_t data_off = offset + header_len;
  if (bytes.size() < data_off + n * item) throw NpyError("truncated npy payload");
  const char* p = bytes.data() + data_off;
  if (arr.dtype == DType::f4) {
    arr.f32.resize(n);
    std::memcpy(arr.f32.data(), p, n * 4);
  } else if (arr.dtype == DType::f8) {
    std::vector<double> tmp(n);
    std::memcpy(tmp.data(), p, n * 8);
    arr.f32.assign(tmp.begin(), tmp.end());
  } else {
    arr.u8.assign(reinterpret_cast<const std::uint8_t*>(p), reinterpret_cast<const std::uint8_t*>(p) + n);
  }
  return arr;
}

inline Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NpyError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

/// Serializes as NPY v1.0; the header is space-padded so the payload
/// starts on a 64-byte boundary.
inline std::string serialize(DType dtype, const std::vector<std::size_t>& shape, const void* data, std::size_t bytes) {
  std::string descr = dtype == DType::f4 ? "<f4" : dtype == DType::f8 ? "<f8" : "|u1";
  std::string header = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + detail::shape_string(shape) + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  const std::size_t total = (unpadded + 63) / 64 * 64;
  header.append(total - unpadded, ' ');
  header.push_back('\n');
  if (header.size() > 65535) throw NpyError("npy header too long");
  std::string out(detail::kMagic, 6);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xff));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
  out += header;
  out.append(static_cast<const char*>(data), bytes);
  return out;
}

inline std::string serialize_f32(const std::vector<std::size_t>& shape, const std::vector<float>& values) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) throw NpyError("npy shape does not match value count");
  return serialize(DType::f4, shape, values.data(), values.size() * sizeof(float));
}

inline std::string serialize_u8(const std::vector<std::size_t>& shape, const std::vector<std::uint8_t>& values) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) throw NpyError("npy shape does not match value count");
  return serialize(DType::u1, shape, values.data(), values.size());
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NpyError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw NpyError("write failed for " + path.string());
}

inline void write_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                      const std::vector<float>& values) {
  write_bytes(path, serialize_f32(shape, values));
}

inline void write_u8(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                     const std::vector<std::uint8_t>& values) {
  write_bytes(path, serialize_u8(shape, values));
}

}  // namespace hierxai::npy
