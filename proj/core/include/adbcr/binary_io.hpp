#pragma once

// Little-endian byte encoding shared by every checkpoint kind.
//
// Container layout:
//   8 bytes  magic "ADBCRCKP"
//   u32      format version
//   u8       payload kind (CheckpointKind)
//   ...      kind-specific payload
//   8 bytes  end marker "ADBCREND"
// Integers are unsigned little-endian, reals are IEEE-754 binary64
// little-endian, strings are a u64 byte count followed by the bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "adbcr/tensor.hpp"

namespace adbcr {

inline constexpr std::string_view kCheckpointMagic = "ADBCRCKP";
inline constexpr std::string_view kCheckpointEnd = "ADBCREND";
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t { network = 1, lasso = 2 };

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void tensor(const Tensor& t);
  void f64s(const std::vector<double>& values);

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

// Bounds-checked reader; any overrun or malformed field throws LoadError.
class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void expect_raw(std::string_view s, const char* what);
  Tensor tensor();
  std::vector<double> f64s();

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n);
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

// Writes the header and `payload`, appends the end marker and replaces
// `path` atomically (write to a sibling temp file, then rename).
void write_container(const std::filesystem::path& path, CheckpointKind kind,
                     const std::vector<char>& payload);

// Reads a whole container, validates magic, version and end marker, and
// returns a reader positioned at the payload.
ByteReader open_container(const std::filesystem::path& path, CheckpointKind expected);

CheckpointKind peek_checkpoint_kind(const std::filesystem::path& path);

// Writes bytes to `path` through a temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace adbcr
