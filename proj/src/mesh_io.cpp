#include "fshapes/errors.hpp"
#include "fshapes/mesh.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fshapes {

namespace {

/// Non-empty, non-comment lines split into whitespace tokens.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::vector<std::string_view>& tokens) {
    tokens.clear();
    while (std::getline(in_, line_)) {
      ++line_number_;
      const auto hash = line_.find('#');
      if (hash != std::string::npos) line_.resize(hash);
      split();
      if (!tokens_.empty()) {
        tokens = tokens_;
        return true;
      }
    }
    return false;
  }

  void require(std::vector<std::string_view>& tokens, std::size_t count, const char* what) {
    if (!next(tokens)) fail(std::string("unexpected end of file while reading ") + what);
    if (tokens.size() != count) {
      fail(std::string("expected ") + std::to_string(count) + " values for " + what + ", got " +
           std::to_string(tokens.size()));
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(source_ + ":" + std::to_string(line_number_) + ": " + msg);
  }

  double to_double(std::string_view tok) const {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad number '" + std::string(tok) + "'");
    return value;
  }

  long to_long(std::string_view tok) const {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad integer '" + std::string(tok) + "'");
    return value;
  }

 private:
  void split() {
    tokens_.clear();
    std::string_view s(line_);
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i) tokens_.push_back(s.substr(i, j - i));
      i = j;
    }
  }

  std::istream& in_;
  std::string source_;
  std::string line_;
  std::vector<std::string_view> tokens_;
  long line_number_ = 0;
};

FShapeMesh read_native_body(LineReader& reader, long d, long n, long P, long T) {
  if (d < 1 || d > 2 || n < 2 || n > 3) reader.fail("unsupported dimensions d=" + std::to_string(d) + " n=" + std::to_string(n));
  if (P < 0 || T < 0) reader.fail("negative counts");
  FShapeMesh mesh;
  mesh.vertices.resize(P, n);
  mesh.signal.resize(P);
  mesh.cells.resize(T, d + 1);
  std::vector<std::string_view> tok;
  // A row without its signal value is a length mismatch, reported after
  // parsing as a validation error rather than a syntax error.
  long signals = 0;
  for (long k = 0; k < P; ++k) {
    if (!reader.next(tok)) reader.fail("unexpected end of file while reading vertex row");
    if (tok.size() != static_cast<std::size_t>(n) && tok.size() != static_cast<std::size_t>(n + 1)) {
      reader.fail("expected " + std::to_string(n + 1) + " values for vertex row, got " + std::to_string(tok.size()));
    }
    for (long a = 0; a < n; ++a) mesh.vertices(k, a) = reader.to_double(tok[static_cast<std::size_t>(a)]);
    if (tok.size() == static_cast<std::size_t>(n + 1)) {
      mesh.signal(k) = reader.to_double(tok[static_cast<std::size_t>(n)]);
      ++signals;
    } else {
      mesh.signal(k) = 0.0;
    }
  }
  if (signals != P) {
    throw ValidationError("signal has " + std::to_string(signals) + " values for " + std::to_string(P) + " vertices");
  }
  for (long c = 0; c < T; ++c) {
    reader.require(tok, static_cast<std::size_t>(d + 1), "cell row");
    for (long a = 0; a <= d; ++a) mesh.cells(c, a) = static_cast<int>(reader.to_long(tok[static_cast<std::size_t>(a)]));
  }
  if (reader.next(tok)) reader.fail("trailing data after last cell");
  return mesh;
}

FShapeMesh read_off(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  std::vector<std::string_view> tok;
  if (!reader.next(tok) || tok.size() != 1 || tok[0] != "OFF") reader.fail("missing OFF header");
  reader.require(tok, 3, "counts 'P T E'");
  const long P = reader.to_long(tok[0]);
  const long T = reader.to_long(tok[1]);
  if (P < 0 || T < 0) reader.fail("negative counts");
  FShapeMesh mesh;
  mesh.vertices.resize(P, 3);
  mesh.signal.resize(P);
  for (long k = 0; k < P; ++k) {
    reader.require(tok, 4, "vertex row 'x y z signal'");
    for (int a = 0; a < 3; ++a) mesh.vertices(k, a) = reader.to_double(tok[static_cast<std::size_t>(a)]);
    mesh.signal(k) = reader.to_double(tok[3]);
  }
  long arity = -1;
  for (long c = 0; c < T; ++c) {
    if (!reader.next(tok)) reader.fail("unexpected end of file while reading face row");
    const long count = reader.to_long(tok[0]);
    if (count != 2 && count != 3) reader.fail("only segments and triangles are supported");
    if (arity < 0) {
      arity = count;
      mesh.cells.resize(T, count);
    } else if (count != arity) {
      reader.fail("mixed cell sizes");
    }
    if (tok.size() != static_cast<std::size_t>(count + 1)) reader.fail("face row length does not match its vertex count");
    for (long a = 0; a < count; ++a) mesh.cells(c, a) = static_cast<int>(reader.to_long(tok[static_cast<std::size_t>(a + 1)]));
  }
  if (T == 0) mesh.cells.resize(0, 3);
  return mesh;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MeshFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".off" ? MeshFormat::OffWithSignal : MeshFormat::NativeAscii;
}

FShapeMesh load_fshape(const std::filesystem::path& path, MeshFormat format, std::vector<Index>* degenerate) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  FShapeMesh mesh;
  if (format == MeshFormat::NativeAscii) {
    LineReader reader(in, path.string());
    std::vector<std::string_view> tok;
    reader.require(tok, 5, "header 'FSHAPE d n P T'");
    if (tok[0] != "FSHAPE") reader.fail("missing FSHAPE header");
    const long d = reader.to_long(tok[1]);
    const long n = reader.to_long(tok[2]);
    const long P = reader.to_long(tok[3]);
    const long T = reader.to_long(tok[4]);
    mesh = read_native_body(reader, d, n, P, T);
  } else {
    mesh = read_off(in, path.string());
  }
  validate(mesh);
  if (degenerate) *degenerate = degenerate_cells(mesh);
  return mesh;
}

FShapeMesh load_fshape(const std::filesystem::path& path) { return load_fshape(path, format_for_path(path)); }

void save_fshape(const FShapeMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  validate(mesh);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const Index P = mesh.num_vertices();
  const int n = mesh.ambient_dim();
  const int d = mesh.cell_dim();
  if (format == MeshFormat::NativeAscii) {
    out << "FSHAPE " << d << ' ' << n << ' ' << P << ' ' << mesh.num_cells() << '\n';
  } else {
    if (n != 3) throw ValidationError("OFF output requires ambient dimension 3");
    out << "OFF\n" << P << ' ' << mesh.num_cells() << " 0\n";
  }
  for (Index k = 0; k < P; ++k) {
    for (int a = 0; a < n; ++a) out << format_double(mesh.vertices(k, a)) << ' ';
    out << format_double(mesh.signal(k)) << '\n';
  }
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    if (format == MeshFormat::OffWithSignal) out << d + 1 << ' ';
    for (int a = 0; a <= d; ++a) out << mesh.cells(c, a) << (a == d ? '\n' : ' ');
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void save_fshape(const FShapeMesh& mesh, const std::filesystem::path& path) {
  save_fshape(mesh, path, format_for_path(path));
}

void save_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  if (!m.allFinite()) throw ValidationError("refusing to write non-finite values to '" + path.string() + "'");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << format_double(m(r, c)) << (c + 1 == m.cols() ? '\n' : ' ');
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  LineReader reader(in, path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::string_view> tok;
  while (reader.next(tok)) {
    if (!rows.empty() && tok.size() != rows.front().size()) reader.fail("ragged matrix row");
    std::vector<double> row;
    row.reserve(tok.size());
    for (auto t : tok) row.push_back(reader.to_double(t));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace fshapes
