#include "plume/io.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace plume::io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw FormatError(FormatErrorKind::io, "write failed for " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw FormatError(FormatErrorKind::io, "cannot rename onto " + path + ": " + ec.message());
  }
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Reads one unsigned header field, skipping whitespace and '#' comments.
long long header_field(std::string_view b, std::size_t& pos, const char* what) {
  while (pos < b.size()) {
    if (is_space(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size())
    throw FormatError(FormatErrorKind::bad_header, std::string("PGM header ends before ") + what);
  long long v = 0;
  auto [end, ec] = std::from_chars(b.data() + pos, b.data() + b.size(), v);
  if (ec != std::errc() || end == b.data() + pos)
    throw FormatError(FormatErrorKind::bad_header, std::string("PGM header: malformed ") + what);
  pos = static_cast<std::size_t>(end - b.data());
  return v;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view b, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
  return v;
}

}  // namespace

Tensor decode_pgm(std::string_view b) {
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5')
    throw FormatError(FormatErrorKind::bad_magic, "not a binary PGM (expected magic P5)");
  std::size_t pos = 2;
  if (pos < b.size() && !is_space(b[pos]) && b[pos] != '#')
    throw FormatError(FormatErrorKind::bad_magic, "not a binary PGM (expected magic P5)");
  const long long w = header_field(b, pos, "width");
  const long long h = header_field(b, pos, "height");
  const long long maxval = header_field(b, pos, "maxval");
  if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20))
    throw FormatError(FormatErrorKind::bad_dims,
                      "PGM header: invalid dimensions " + std::to_string(w) + "x" + std::to_string(h));
  if (maxval != 255)
    throw FormatError(FormatErrorKind::bad_maxval,
                      "PGM maxval " + std::to_string(maxval) + " unsupported (only 255)");
  if (pos >= b.size() || !is_space(b[pos]))
    throw FormatError(FormatErrorKind::bad_header, "PGM header: missing whitespace after maxval");
  ++pos;
  const auto n = static_cast<std::size_t>(w * h);
  if (b.size() - pos < n)
    throw FormatError(FormatErrorKind::truncated, "PGM payload truncated: expected " +
                                                      std::to_string(n) + " bytes, found " +
                                                      std::to_string(b.size() - pos));
  if (b.size() - pos > n)
    throw FormatError(FormatErrorKind::trailing, "PGM has " + std::to_string(b.size() - pos - n) +
                                                     " bytes after the payload");
  Tensor t(Shape{1, 1, static_cast<int>(h), static_cast<int>(w)});
  for (std::size_t i = 0; i < n; ++i)
    t[i] = static_cast<float>(static_cast<unsigned char>(b[pos + i])) / 255.0f;
  return t;
}

Tensor read_pgm(const std::string& path) { return decode_pgm(read_file(path)); }

std::string encode_pgm(const Tensor& t) {
  if (t.batch() != 1 || t.channels() != 1)
    throw ShapeError("PGM output needs a (1,1,H,W) tensor, got " + t.shape().str());
  std::string s = "P5\n" + std::to_string(t.width()) + " " + std::to_string(t.height()) + "\n255\n";
  s.reserve(s.size() + t.size());
  for (float v : t.data()) {
    const double c = std::isnan(v) ? 0.0 : std::clamp(static_cast<double>(v), 0.0, 1.0);
    s.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(c * 255.0 + 0.5))));
  }
  return s;
}

void write_pgm(const Tensor& t, const std::string& path) { write_file_atomic(path, encode_pgm(t)); }

Tensor decode_tensor(std::string_view b) {
  if (b.size() < 5 || std::memcmp(b.data(), kTensorMagic, 4) != 0)
    throw FormatError(FormatErrorKind::bad_magic, "not a tensor file (expected magic GTSR)");
  if (static_cast<unsigned char>(b[4]) != kTensorVersion)
    throw FormatError(FormatErrorKind::bad_header,
                      "unsupported tensor file version " + std::to_string(static_cast<unsigned char>(b[4])));
  if (b.size() < kTensorHeaderBytes)
    throw FormatError(FormatErrorKind::truncated, "tensor file header truncated");
  std::uint32_t d[4];
  for (int i = 0; i < 4; ++i) d[i] = get_u32(b, 5 + 4 * i);
  for (auto v : d)
    if (v == 0 || v > (1u << 24))
      throw FormatError(FormatErrorKind::bad_dims, "tensor file: invalid dimension " + std::to_string(v));
  const Shape s{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
                static_cast<int>(d[3])};
  const unsigned long long n = 1ull * d[0] * d[1] * d[2] * d[3];
  if (n > (1ull << 31)) throw FormatError(FormatErrorKind::bad_dims, "tensor file: too many entries");
  const std::size_t payload = b.size() - kTensorHeaderBytes;
  if (payload < 4 * n)
    throw FormatError(FormatErrorKind::truncated, "tensor payload truncated: expected " +
                                                      std::to_string(4 * n) + " bytes, found " +
                                                      std::to_string(payload));
  if (payload > 4 * n)
    throw FormatError(FormatErrorKind::trailing, "tensor payload has " + std::to_string(payload - 4 * n) +
                                                     " trailing bytes");
  Tensor t(s);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(b, kTensorHeaderBytes + 4 * i);
    std::memcpy(&t[i], &bits, 4);
  }
  return t;
}

std::string encode_tensor(const Tensor& t) {
  std::string s(kTensorMagic, 4);
  s.push_back(static_cast<char>(kTensorVersion));
  for (int v : {t.batch(), t.channels(), t.height(), t.width()}) put_u32(s, static_cast<std::uint32_t>(v));
  s.reserve(s.size() + 4 * t.size());
  for (float v : t.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(s, bits);
  }
  return s;
}

Tensor read_tensor(const std::string& path) { return decode_tensor(read_file(path)); }

void write_tensor(const Tensor& t, const std::string& path) { write_file_atomic(path, encode_tensor(t)); }

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

void Report::add(const std::string& name, const std::string& value) {
  if (name.find_first_of("\t\n") != std::string::npos || value.find_first_of("\t\n") != std::string::npos)
    throw std::invalid_argument("report entries cannot contain tabs or newlines");
  lines_.emplace_back(name, value);
}

void Report::add(const std::string& name, double value) { add(name, format_real(value)); }

void Report::add(const std::string& name, long long value) { add(name, std::to_string(value)); }

std::string Report::str() const {
  std::string s;
  for (const auto& [k, v] : lines_) s += k + '\t' + v + '\n';
  return s;
}

void Report::write(const std::string& path) const { write_file_atomic(path, str()); }

}  // namespace plume::io
