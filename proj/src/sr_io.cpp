#include "sephjb/sr_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace sephjb {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'P', 'H', 'J', 'B', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kTextMagic = "SEPHJBSR-TEXT";

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > s_.size()) throw IoError("sr: file is truncated");
    unsigned char b[sizeof(T)];
    std::memcpy(b, s_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  bool done() const { return pos_ == s_.size(); }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

void put_matrix(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
}

std::string header_binary(SrKind kind, const Shape& shape, Index rank) {
  std::string out(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, kind == SrKind::vector ? 0u : 1u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (Index m : shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(m));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rank));
  return out;
}

void text_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void text_matrix(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      text_number(out, m(i, j));
    }
    out += '\n';
  }
}

std::string header_text(SrKind kind, const Shape& shape, Index rank, std::span<const double> scales) {
  std::string out = std::string(kTextMagic) + " 1\n";
  out += kind == SrKind::vector ? "kind vector\n" : "kind operator\n";
  out += "dims " + std::to_string(shape.size()) + "\nmodes";
  for (Index m : shape) out += " " + std::to_string(m);
  out += "\nrank " + std::to_string(rank) + "\nscales\n";
  for (double s : scales) {
    text_number(out, s);
    out += '\n';
  }
  return out;
}

Matrix read_matrix(Reader& r, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = r.get<double>();
  return m;
}

// strtod keeps subnormals that operator>> would reject.
double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("sr: truncated text file");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw IoError("sr: bad number '" + tok + "'");
  return v;
}

Matrix read_matrix(std::istream& in, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = read_double(in);
  return m;
}

void expect(std::istream& in, const std::string& word) {
  std::string w;
  if (!(in >> w) || w != word) throw IoError("sr: expected '" + word + "' in text file");
}

// Sanity limit on header sizes so corrupt files fail fast.
void check_header(const Shape& shape, std::uint64_t rank) {
  if (shape.empty() || shape.size() > 64) throw IoError("sr: bad dimension count");
  for (Index m : shape)
    if (m < 1 || m > (Index{1} << 24)) throw IoError("sr: bad mode size");
  if (rank > (std::uint64_t{1} << 24)) throw IoError("sr: bad rank");
}

SrContent build(SrKind kind, const Shape& shape, std::vector<double> scales,
                std::vector<Matrix> vec_factors, std::vector<std::vector<Matrix>> op_terms) {
  SrContent c;
  c.kind = kind;
  if (kind == SrKind::vector) {
    c.vector = scales.empty() ? SepVector(shape) : SepVector(std::move(scales), std::move(vec_factors));
  } else {
    c.op = SepOperator(shape, std::move(scales), std::move(op_terms));
  }
  return c;
}

SrContent decode_binary(const std::string& bytes) {
  Reader r(bytes);
  r.skip(8);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw IoError("sr: unsupported version " + std::to_string(version));
  const auto kind_code = r.get<std::uint32_t>();
  if (kind_code > 1) throw IoError("sr: unknown content kind");
  const SrKind kind = kind_code == 0 ? SrKind::vector : SrKind::op;
  const auto d = r.get<std::uint32_t>();
  if (d == 0 || d > 64) throw IoError("sr: bad dimension count");
  Shape shape;
  for (std::uint32_t i = 0; i < d; ++i) shape.push_back(static_cast<Index>(r.get<std::uint64_t>()));
  const auto rank = r.get<std::uint64_t>();
  check_header(shape, rank);
  std::vector<double> scales;
  for (std::uint64_t l = 0; l < rank; ++l) scales.push_back(r.get<double>());
  std::vector<Matrix> vf;
  std::vector<std::vector<Matrix>> terms;
  const Index rk = static_cast<Index>(rank);
  if (kind == SrKind::vector) {
    for (Index m : shape) vf.push_back(read_matrix(r, m, rk));
  } else {
    for (Index l = 0; l < rk; ++l) {
      std::vector<Matrix> t;
      for (Index m : shape) t.push_back(read_matrix(r, m, m));
      terms.push_back(std::move(t));
    }
  }
  if (!r.done()) throw IoError("sr: trailing bytes after payload");
  return build(kind, shape, std::move(scales), std::move(vf), std::move(terms));
}

SrContent decode_text(const std::string& bytes) {
  std::istringstream in(bytes);
  in.imbue(std::locale::classic());
  expect(in, kTextMagic);
  int version = 0;
  if (!(in >> version) || version != 1) throw IoError("sr: unsupported text version");
  expect(in, "kind");
  std::string k;
  in >> k;
  if (k != "vector" && k != "operator") throw IoError("sr: unknown content kind '" + k + "'");
  const SrKind kind = k == "vector" ? SrKind::vector : SrKind::op;
  expect(in, "dims");
  std::size_t d = 0;
  if (!(in >> d) || d == 0 || d > 64) throw IoError("sr: bad dimension count");
  expect(in, "modes");
  Shape shape(d);
  for (auto& m : shape)
    if (!(in >> m)) throw IoError("sr: bad mode sizes");
  expect(in, "rank");
  std::uint64_t rank = 0;
  if (!(in >> rank)) throw IoError("sr: bad rank");
  check_header(shape, rank);
  expect(in, "scales");
  std::vector<double> scales(rank);
  for (double& s : scales) s = read_double(in);
  const Index rk = static_cast<Index>(rank);
  std::vector<Matrix> vf;
  std::vector<std::vector<Matrix>> terms;
  if (kind == SrKind::vector) {
    for (std::size_t i = 0; i < d; ++i) {
      expect(in, "factor");
      std::size_t idx = 0;
      if (!(in >> idx) || idx != i) throw IoError("sr: factors out of order");
      vf.push_back(read_matrix(in, shape[i], rk));
    }
  } else {
    for (Index l = 0; l < rk; ++l) {
      std::vector<Matrix> t;
      for (std::size_t i = 0; i < d; ++i) {
        expect(in, "term");
        Index tl = 0;
        std::size_t ti = 0;
        if (!(in >> tl >> ti) || tl != l || ti != i) throw IoError("sr: terms out of order");
        t.push_back(read_matrix(in, shape[i], shape[i]));
      }
      terms.push_back(std::move(t));
    }
  }
  std::string rest;
  if (in >> rest) throw IoError("sr: trailing content after payload");
  return build(kind, shape, std::move(scales), std::move(vf), std::move(terms));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

}  // namespace

std::string encode_sr(const SepVector& f, SrFormat format) {
  if (format == SrFormat::binary) {
    std::string out = header_binary(SrKind::vector, f.shape(), f.rank());
    for (double s : f.scales()) put<double>(out, s);
    for (int i = 0; i < f.dims(); ++i) put_matrix(out, f.factor(i));
    return out;
  }
  std::string out = header_text(SrKind::vector, f.shape(), f.rank(), f.scales());
  for (int i = 0; i < f.dims(); ++i) {
    out += "factor " + std::to_string(i) + "\n";
    if (f.rank() > 0) text_matrix(out, f.factor(i));
  }
  return out;
}

std::string encode_sr(const SepOperator& A, SrFormat format) {
  if (format == SrFormat::binary) {
    std::string out = header_binary(SrKind::op, A.shape(), A.rank());
    for (double s : A.scales()) put<double>(out, s);
    for (Index l = 0; l < A.rank(); ++l)
      for (int i = 0; i < A.dims(); ++i) put_matrix(out, A.factor(l, i));
    return out;
  }
  std::string out = header_text(SrKind::op, A.shape(), A.rank(), A.scales());
  for (Index l = 0; l < A.rank(); ++l) {
    for (int i = 0; i < A.dims(); ++i) {
      out += "term " + std::to_string(l) + " " + std::to_string(i) + "\n";
      text_matrix(out, A.factor(l, i));
    }
  }
  return out;
}

SrContent decode_sr(const std::string& bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0) {
    if (bytes.compare(0, std::strlen(kTextMagic), kTextMagic) == 0) return decode_text(bytes);
    return decode_binary(bytes);
  }
  throw IoError("sr: not a separated-representation file");
}

void write_sr(const std::filesystem::path& path, const SepVector& f, SrFormat format) {
  atomic_write(path, encode_sr(f, format));
}

void write_sr(const std::filesystem::path& path, const SepOperator& A, SrFormat format) {
  atomic_write(path, encode_sr(A, format));
}

SrContent read_sr(const std::filesystem::path& path) { return decode_sr(read_file(path)); }

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : ".";
  const std::filesystem::path tmp =
      dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

}  // namespace sephjb
