#include "tenstream/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "tenstream/errors.hpp"

namespace tenstream {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("not a number: '" + s + "'");
  if (!std::isfinite(v)) throw DataError("value must be finite: '" + s + "'");
  return v;
}

namespace {

struct Reader {
  std::istream& in;
  std::string name;
  long line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(name + ":" + std::to_string(line_no) + ": " + msg);
  }

  // Next line split into tokens; comment lines come back with is_comment set.
  bool next(std::vector<std::string>& tokens, bool& is_comment, std::string& raw) {
    while (std::getline(in, raw)) {
      ++line_no;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      std::istringstream ss(raw);
      tokens.clear();
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (tokens.empty()) continue;
      is_comment = tokens[0][0] == '#';
      return true;
    }
    return false;
  }

  Index index(const std::string& s) const {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad index '" + s + "'");
    if (v < 1) fail("indices are 1-based, got " + s);
    return static_cast<Index>(v);
  }

  double value(const std::string& s) const {
    try {
      return parse_double(s);
    } catch (const DataError& e) {
      fail(e.what());
    }
  }

  // Parses `# key: a b c` into its integer list when the key matches.
  bool header(const std::string& raw, const std::string& key, std::vector<Index>& out) const {
    std::string s = raw.substr(raw.find('#') + 1);
    std::istringstream ss(s);
    std::string k;
    if (!(ss >> k) || k != key + ":") return false;
    out.clear();
    for (std::string tok; ss >> tok;) out.push_back(index(tok));
    if (out.empty()) fail("empty '" + key + "' header");
    return true;
  }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  return f;
}

}  // namespace

SparseTensor read_coordinate(std::istream& in, const std::string& name) {
  Reader r{in, name};
  Shape shape;
  bool have_shape = false, seen_data = false;
  int order = 0;
  struct Entry {
    std::vector<Index> idx;
    double v;
    long line;
  };
  std::vector<Entry> entries;
  std::vector<std::string> tok;
  std::string raw;
  bool comment = false;
  while (r.next(tok, comment, raw)) {
    if (comment) {
      std::vector<Index> h;
      if (r.header(raw, "shape", h)) {
        if (seen_data || have_shape) r.fail("shape header must come once, before the entries");
        shape = h;
        have_shape = true;
        order = static_cast<int>(shape.size());
      }
      continue;
    }
    seen_data = true;
    if (order == 0) order = static_cast<int>(tok.size()) - 1;
    if (order < 1 || static_cast<int>(tok.size()) != order + 1)
      r.fail("expected " + std::to_string(order + 1) + " fields, got " + std::to_string(tok.size()));
    Entry e{{}, r.value(tok.back()), r.line_no};
    for (int m = 0; m < order; ++m) {
      Index i = r.index(tok[m]);
      if (have_shape && i > shape[m]) r.fail("index " + tok[m] + " outside declared shape");
      e.idx.push_back(i - 1);
    }
    entries.push_back(std::move(e));
  }
  if (!have_shape) {
    if (entries.empty()) throw DataError(name + ": no shape header and no entries");
    shape.assign(order, 0);
    for (const auto& e : entries)
      for (int m = 0; m < order; ++m) shape[m] = std::max(shape[m], e.idx[m] + 1);
  }
  auto linear = [&](const std::vector<Index>& idx) {
    Index lin = 0;
    for (int m = order - 1; m >= 0; --m) lin = lin * shape[m] + idx[m];
    return lin;
  };
  std::vector<std::size_t> perm(entries.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return linear(entries[a].idx) < linear(entries[b].idx);
  });
  std::vector<Index> indices;
  std::vector<double> values;
  for (std::size_t p = 0; p < perm.size(); ++p) {
    const Entry& e = entries[perm[p]];
    if (p > 0 && linear(entries[perm[p - 1]].idx) == linear(e.idx)) {
      const long first = std::min(e.line, entries[perm[p - 1]].line), second = std::max(e.line, entries[perm[p - 1]].line);
      throw DataError(name + ":" + std::to_string(second) + ": duplicate coordinate (first at line " +
                      std::to_string(first) + ")");
    }
    if (e.v == 0.0) continue;
    indices.insert(indices.end(), e.idx.begin(), e.idx.end());
    values.push_back(e.v);
  }
  return SparseTensor(shape, std::move(indices), std::move(values));
}

void write_coordinate(std::ostream& out, const SparseTensor& t) {
  out << "# shape:";
  for (Index d : t.shape()) out << ' ' << d;
  out << '\n';
  for (Index e = 0; e < t.nnz(); ++e) {
    for (int m = 0; m < t.order(); ++m) out << t.index(e, m) + 1 << ' ';
    out << format_double(t.value(e)) << '\n';
  }
}

SparseTensor load_tensor(const std::string& path) {
  std::ifstream f = open_in(path);
  return read_coordinate(f, path);
}

void save_tensor(const SparseTensor& t, const std::string& path) {
  std::ofstream f = open_out(path);
  write_coordinate(f, t);
  if (!f) throw DataError("write failed: " + path);
}

IrregularTensor read_irregular(std::istream& in, const std::string& name) {
  Reader r{in, name};
  std::vector<Index> heights, cols_h;
  bool seen_data = false;
  struct Entry {
    Index k, i, j;
    double v;
    long line;
  };
  std::vector<Entry> entries;
  std::vector<std::string> tok;
  std::string raw;
  bool comment = false;
  while (r.next(tok, comment, raw)) {
    if (comment) {
      std::vector<Index> h;
      if (r.header(raw, "slices", h)) {
        if (seen_data) r.fail("headers must come before the entries");
        heights = h;
      } else if (r.header(raw, "cols", h)) {
        if (seen_data) r.fail("headers must come before the entries");
        if (h.size() != 1) r.fail("cols header takes one value");
        cols_h = h;
      }
      continue;
    }
    seen_data = true;
    if (tok.size() != 4) r.fail("expected 4 fields (k i j value), got " + std::to_string(tok.size()));
    Entry e{r.index(tok[0]), r.index(tok[1]), r.index(tok[2]), r.value(tok[3]), r.line_no};
    if (!heights.empty()) {
      if (e.k > static_cast<Index>(heights.size())) r.fail("slice index beyond the slices header");
      if (e.i > heights[e.k - 1]) r.fail("row index beyond the declared slice height");
    }
    if (!cols_h.empty() && e.j > cols_h[0]) r.fail("column index beyond the cols header");
    entries.push_back(e);
  }
  Index K = static_cast<Index>(heights.size()), J = cols_h.empty() ? 0 : cols_h[0];
  if (heights.empty()) {
    for (const auto& e : entries) K = std::max(K, e.k);
    heights.assign(K, 0);
    for (const auto& e : entries) heights[e.k - 1] = std::max(heights[e.k - 1], e.i);
    for (Index k = 0; k < K; ++k)
      if (heights[k] == 0) throw DataError(name + ": slice " + std::to_string(k + 1) + " is missing");
  }
  if (cols_h.empty())
    for (const auto& e : entries) J = std::max(J, e.j);
  if (K == 0 || J == 0) throw DataError(name + ": no slices");
  IrregularTensor t;
  for (Index k = 0; k < K; ++k) t.slices.push_back(Matrix::Zero(heights[k], J));
  std::map<std::array<Index, 3>, long> seen;
  for (const auto& e : entries) {
    auto [it, fresh] = seen.emplace(std::array<Index, 3>{e.k, e.i, e.j}, e.line);
    if (!fresh)
      throw DataError(name + ":" + std::to_string(e.line) + ": duplicate coordinate (first at line " +
                      std::to_string(it->second) + ")");
    t.slices[e.k - 1](e.i - 1, e.j - 1) = e.v;
  }
  return t;
}

void write_irregular(std::ostream& out, const IrregularTensor& t) {
  out << "# slices:";
  for (const auto& s : t.slices) out << ' ' << s.rows();
  out << "\n# cols: " << t.cols() << '\n';
  for (Index k = 0; k < t.num_slices(); ++k) {
    const Matrix& s = t.slices[k];
    for (Index i = 0; i < s.rows(); ++i)
      for (Index j = 0; j < s.cols(); ++j)
        if (s(i, j) != 0.0) out << k + 1 << ' ' << i + 1 << ' ' << j + 1 << ' ' << format_double(s(i, j)) << '\n';
  }
}

IrregularTensor load_irregular(const std::string& path) {
  std::ifstream f = open_in(path);
  return read_irregular(f, path);
}

void save_irregular(const IrregularTensor& t, const std::string& path) {
  std::ofstream f = open_out(path);
  write_irregular(f, t);
  if (!f) throw DataError("write failed: " + path);
}

Matrix read_csv(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(raw);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(parse_double(cell));
      } catch (const DataError& e) {
        throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(name + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(name + ": empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

Matrix load_csv(const std::string& path) {
  std::ifstream f = open_in(path);
  return read_csv(f, path);
}

void save_csv(const Matrix& m, const std::string& path) {
  std::ofstream f = open_out(path);
  write_csv(f, m);
  if (!f) throw DataError("write failed: " + path);
}

}  // namespace tenstream
