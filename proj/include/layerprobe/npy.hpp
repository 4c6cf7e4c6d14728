#pragma once

// Reader/writer for the NPY v1.0 subset the container uses: little-endian
// float32/float64, C order, 1-D or 2-D. Anything else is rejected.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"

namespace layerprobe {

enum class NpyDtype { f32, f64 };

namespace detail {

inline constexpr std::string_view kNpyMagic{"\x93NUMPY", 6};

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

class HeaderScanner {
 public:
  explicit HeaderScanner(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }
  std::string quoted() {
    skip_ws();
    if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) fail("expected string");
    const char q = text_[pos_++];
    const auto end = text_.find(q, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }
  std::string word() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected token");
    return std::string(text_.substr(start, pos_ - start));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("npy: malformed header (" + what + " at offset " + std::to_string(pos_) + ")");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline NpyHeader parse_npy_header(std::string_view text) {
  HeaderScanner s(text);
  NpyHeader h;
  bool have_descr = false, have_order = false, have_shape = false;
  s.expect('{');
  while (!s.consume('}')) {
    const std::string key = s.quoted();
    s.expect(':');
    if (key == "descr") {
      h.descr = s.quoted();
      have_descr = true;
    } else if (key == "fortran_order") {
      const std::string v = s.word();
      if (v != "True" && v != "False") s.fail("fortran_order must be True or False");
      h.fortran_order = v == "True";
      have_order = true;
    } else if (key == "shape") {
      s.expect('(');
      while (!s.consume(')')) {
        const std::string v = s.word();
        std::size_t dim = 0;
        for (char c : v) {
          if (!std::isdigit(static_cast<unsigned char>(c))) s.fail("shape entries must be integers");
          dim = dim * 10 + static_cast<std::size_t>(c - '0');
        }
        h.shape.push_back(dim);
        s.consume(',');
      }
      have_shape = true;
    } else {
      s.fail("unexpected key '" + key + "'");
    }
    s.consume(',');
  }
  if (!have_descr || !have_order || !have_shape) s.fail("missing descr, fortran_order or shape");
  return h;
}

inline std::uint64_t load_le(const char* p, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

inline void store_le(std::string& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace detail

// Decodes an in-memory NPY file. Values are promoted to double.
inline Matrix parse_npy(std::string_view bytes) {
  if (bytes.size() < 6 || bytes.substr(0, 6) != detail::kNpyMagic) throw InputError("npy: bad magic");
  if (bytes.size() < 10) throw InputError("npy: truncated header");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw InputError("npy: unsupported version " + std::to_string(major) + "." + std::to_string(minor));
  }
  const auto header_len = static_cast<std::size_t>(detail::load_le(bytes.data() + 8, 2));
  if (bytes.size() < 10 + header_len) throw InputError("npy: truncated header");
  const auto header = detail::parse_npy_header(bytes.substr(10, header_len));

  std::size_t width = 0;
  if (header.descr == "<f4") {
    width = 4;
  } else if (header.descr == "<f8") {
    width = 8;
  } else {
    throw InputError("npy: unsupported dtype '" + header.descr + "'");
  }
  if (header.fortran_order) throw InputError("npy: unsupported order (fortran_order=True)");

  std::size_t rows = 0, cols = 0;
  if (header.shape.size() == 1) {
    rows = 1;
    cols = header.shape[0];
  } else if (header.shape.size() == 2) {
    rows = header.shape[0];
    cols = header.shape[1];
  } else {
    throw InputError("npy: unsupported shape rank " + std::to_string(header.shape.size()));
  }

  const std::size_t count = rows * cols;
  const std::string_view payload = bytes.substr(10 + header_len);
  if (payload.size() < count * width) {
    throw InputError("npy: truncated payload (expected " + std::to_string(count * width) +
                     " bytes, found " + std::to_string(payload.size()) + ")");
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t raw = detail::load_le(payload.data() + i * width, width);
    data[i] = width == 8 ? std::bit_cast<double>(raw)
                         : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
  }
  return Matrix(rows, cols, std::move(data));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

inline Matrix read_npy(const std::filesystem::path& path) {
  try {
    return parse_npy(read_file_bytes(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// Always writes a 2-D array. Header padded with spaces so the payload starts
// on a 64-byte boundary.
inline std::string encode_npy(const Matrix& m, NpyDtype dtype = NpyDtype::f64) {
  std::ostringstream dict;
  dict << "{'descr': '" << (dtype == NpyDtype::f64 ? "<f8" : "<f4")
       << "', 'fortran_order': False, 'shape': (" << m.rows() << ", " << m.cols() << "), }";
  std::string header = dict.str();
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out(detail::kNpyMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  detail::store_le(out, header.size(), 2);
  out += header;
  const std::size_t width = dtype == NpyDtype::f64 ? 8 : 4;
  out.reserve(out.size() + m.data().size() * width);
  for (double v : m.data()) {
    if (dtype == NpyDtype::f64) {
      detail::store_le(out, std::bit_cast<std::uint64_t>(v), 8);
    } else {
      detail::store_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    }
  }
  return out;
}

inline void write_npy(const std::filesystem::path& path, const Matrix& m, NpyDtype dtype = NpyDtype::f64) {
  write_file_bytes(path, encode_npy(m, dtype));
}

}  // namespace layerprobe
