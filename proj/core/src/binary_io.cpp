#include "adbcr/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "adbcr/errors.hpp"

namespace adbcr {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u64(s.size());
  raw(s);
}

void ByteWriter::tensor(const Tensor& t) {
  u64(t.rows());
  u64(t.cols());
  for (double v : t.data()) f64(v);
}

void ByteWriter::f64s(const std::vector<double>& values) {
  u64(values.size());
  for (double v : values) f64(v);
}

void ByteReader::need(std::size_t n) {
  if (bytes_.size() - pos_ < n) throw LoadError("checkpoint truncated");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(bytes_[pos_++]);
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
  }
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
  }
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return s;
}

void ByteReader::expect_raw(std::string_view s, const char* what) {
  need(s.size());
  if (std::memcmp(bytes_.data() + pos_, s.data(), s.size()) != 0) {
    throw LoadError(std::string("checkpoint: bad ") + what);
  }
  pos_ += s.size();
}

Tensor ByteReader::tensor() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) throw LoadError("checkpoint truncated");
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = f64();
  return Tensor(rows, cols, std::move(data));
}

std::vector<double> ByteReader::f64s() {
  const std::uint64_t n = u64();
  if (n > (bytes_.size() - pos_) / 8) throw LoadError("checkpoint truncated");
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_container(const std::filesystem::path& path, CheckpointKind kind,
                     const std::vector<char>& payload) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  std::string contents(w.bytes().begin(), w.bytes().end());
  contents.append(payload.begin(), payload.end());
  contents.append(kCheckpointEnd);
  write_file_atomic(path, contents);
}

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

ByteReader open_container(const std::filesystem::path& path, CheckpointKind expected) {
  std::vector<char> bytes = read_all(path);
  if (bytes.size() < kCheckpointMagic.size() + 5 + kCheckpointEnd.size() ||
      std::memcmp(bytes.data() + bytes.size() - kCheckpointEnd.size(), kCheckpointEnd.data(),
                  kCheckpointEnd.size()) != 0) {
    throw LoadError("checkpoint truncated or missing end marker: " + path.string());
  }
  bytes.resize(bytes.size() - kCheckpointEnd.size());
  ByteReader r(std::move(bytes));
  r.expect_raw(kCheckpointMagic, "magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto kind = static_cast<CheckpointKind>(r.u8());
  if (kind != expected) throw LoadError("checkpoint holds a different model kind");
  return r;
}

CheckpointKind peek_checkpoint_kind(const std::filesystem::path& path) {
  std::vector<char> bytes = read_all(path);
  ByteReader r(std::move(bytes));
  r.expect_raw(kCheckpointMagic, "magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw LoadError("checkpoint version unsupported");
  const std::uint8_t kind = r.u8();
  if (kind != static_cast<std::uint8_t>(CheckpointKind::network) &&
      kind != static_cast<std::uint8_t>(CheckpointKind::lasso)) {
    throw LoadError("unknown checkpoint kind");
  }
  return static_cast<CheckpointKind>(kind);
}

}  // namespace adbcr
