// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte encoding and crash-safe file writes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace mivc::io {

class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s) { buf_.append(s); }

  const std::string& str() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Reads little-endian values; running past the end throws
/// LoadError(kTruncated) naming `context`.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::uint32_t u32();
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  const std::string& context() const noexcept { return context_; }

 private:
  void need(std::size_t n);

  std::string_view data_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// Throws LoadError(kMissingFile) when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`, so readers see
/// either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string to_hex(std::string_view bytes);

}  // namespace mivc::io
