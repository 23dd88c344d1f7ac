#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plume/tensor.hpp"

namespace plume::io {

enum class FormatErrorKind { io, bad_magic, bad_header, bad_maxval, bad_dims, truncated, trailing };

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

std::string read_file(const std::string& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

/// Binary P5 with maxval 255 to a (1, 1, H, W) tensor with entries p / 255.
Tensor decode_pgm(std::string_view bytes);
Tensor read_pgm(const std::string& path);
/// Single-channel, single-image tensors only. Values are clamped to [0, 1]
/// and quantized as floor(v * 255 + 0.5).
std::string encode_pgm(const Tensor& t);
void write_pgm(const Tensor& t, const std::string& path);

/// "GTSR", version 0x01, u32 LE B, C, H, W, then float32 LE payload.
inline constexpr char kTensorMagic[4] = {'G', 'T', 'S', 'R'};
inline constexpr unsigned char kTensorVersion = 0x01;
inline constexpr std::size_t kTensorHeaderBytes = 21;

Tensor decode_tensor(std::string_view bytes);
std::string encode_tensor(const Tensor& t);
Tensor read_tensor(const std::string& path);
void write_tensor(const Tensor& t, const std::string& path);

/// Text report, one "name<TAB>value" line per metric.
class Report {
 public:
  void add(const std::string& name, const std::string& value);
  void add(const std::string& name, double value);
  void add(const std::string& name, long long value);
  void add(const std::string& name, int value) { add(name, static_cast<long long>(value)); }
  void add(const std::string& name, std::size_t value) { add(name, static_cast<long long>(value)); }

  const std::vector<std::pair<std::string, std::string>>& lines() const { return lines_; }
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

/// Shortest round-trip decimal form of a double.
std::string format_real(double v);

}  // namespace plume::io
