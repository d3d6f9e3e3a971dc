#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace laadmm {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL);

void write_bytes(const std::string& path, const std::string& bytes);
std::string read_bytes(const std::string& path);

/// Little-endian binary container: 8-byte magic, u32 version, payload and a
/// trailing FNV-1a checksum over everything before it.
class ByteWriter {
 public:
  ByteWriter(std::string_view magic, std::uint32_t version);

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void vec(const Eigen::VectorXd& v);
  void mat(const Eigen::MatrixXd& m);

  /// Appends the checksum and returns the finished buffer.
  std::string finish();

 private:
  std::string buf_;
};

class ByteReader {
 public:
  /// Verifies magic, version and checksum; throws FormatError on mismatch.
  ByteReader(std::string data, std::string_view magic, std::uint32_t version);

  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  std::string str();
  Eigen::VectorXd vec();
  Eigen::MatrixXd mat();

  bool at_end() const { return pos_ == end_; }
  /// Throws unless the whole payload was consumed.
  void expect_end() const;

 private:
  void need(std::size_t bytes) const;

  std::string data_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace laadmm
