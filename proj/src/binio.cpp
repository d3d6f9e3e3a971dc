#include "laadmm/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace laadmm {

static_assert(std::endian::native == std::endian::little, "binary files assume a little-endian host");

namespace {

constexpr std::size_t kMagicSize = 8;
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 40;

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

std::string padded_magic(std::string_view magic) {
  std::string m(magic.substr(0, kMagicSize));
  m.resize(kMagicSize, '\0');
  return m;
}

}  // namespace

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed: " + path);
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ByteWriter::ByteWriter(std::string_view magic, std::uint32_t version) : buf_(padded_magic(magic)) { u32(version); }

void ByteWriter::u32(std::uint32_t v) { put(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put(buf_, v); }
void ByteWriter::f64(double v) { put(buf_, v); }

void ByteWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void ByteWriter::vec(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void ByteWriter::mat(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
}

std::string ByteWriter::finish() {
  std::string out = buf_;
  put(out, fnv1a(buf_));
  return out;
}

ByteReader::ByteReader(std::string data, std::string_view magic, std::uint32_t version) : data_(std::move(data)) {
  if (data_.size() < kMagicSize + sizeof(std::uint32_t) + sizeof(std::uint64_t))
    throw FormatError("file truncated");
  end_ = data_.size() - sizeof(std::uint64_t);
  if (data_.compare(0, kMagicSize, padded_magic(magic)) != 0) throw FormatError("bad magic");
  std::uint64_t stored = 0;
  std::memcpy(&stored, data_.data() + end_, sizeof(stored));
  if (stored != fnv1a(std::string_view(data_).substr(0, end_))) throw FormatError("checksum mismatch (corrupted or truncated file)");
  pos_ = kMagicSize;
  const std::uint32_t v = u32();
  if (v != version) throw FormatError("unsupported version " + std::to_string(v));
}

void ByteReader::need(std::size_t bytes) const {
  if (bytes > end_ - pos_) throw FormatError("unexpected end of data");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

Eigen::VectorXd ByteReader::vec() {
  const std::uint64_t n = u64();
  if (n > kMaxCount) throw FormatError("vector size out of range");
  need(n * 8);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  return v;
}

Eigen::MatrixXd ByteReader::mat() {
  const std::uint64_t r = u64();
  const std::uint64_t c = u64();
  if (r > kMaxCount || c > kMaxCount || (c != 0 && r > kMaxCount / c)) throw FormatError("matrix size out of range");
  need(r * c * 8);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
  return m;
}

void ByteReader::expect_end() const {
  if (pos_ != end_) throw FormatError("trailing bytes in payload");
}

}  // namespace laadmm
