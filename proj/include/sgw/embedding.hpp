#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgw/errors.hpp"
#include "sgw/matrix.hpp"
#include "sgw/rng.hpp"

namespace sgw {

// A finite metric-measure space: n points in R^d with uniform weights 1/n
// and optional class labels. Immutable after construction.
class EmbeddingSet {
 public:
  EmbeddingSet(Matrix points, std::optional<std::vector<std::string>> labels = std::nullopt)
      : points_(std::move(points)), labels_(std::move(labels)) {
    if (points_.rows() == 0 || points_.cols() == 0)
      throw InvalidArgument("EmbeddingSet: need n >= 1 and d >= 1");
    if (!points_.all_finite()) throw InvalidArgument("EmbeddingSet: non-finite coordinate");
    if (labels_ && labels_->size() != points_.rows())
      throw SizeMismatch("EmbeddingSet: labels.length != n");
  }

  std::size_t size() const { return points_.rows(); }
  std::size_t dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  bool has_labels() const { return labels_.has_value(); }
  const std::vector<std::string>& labels() const {
    if (!labels_) throw MissingLabels("EmbeddingSet: no labels");
    return *labels_;
  }
  double weight() const { return 1.0 / static_cast<double>(size()); }

 private:
  Matrix points_;
  std::optional<std::vector<std::string>> labels_;
};

// Symmetric nonnegative matrix of intra-domain distances, zero diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols()) throw ShapeMismatch("DistanceMatrix: not square");
    for (std::size_t i = 0; i < values_.rows(); ++i) {
      if (values_(i, i) != 0.0) throw InvalidArgument("DistanceMatrix: nonzero diagonal");
      for (std::size_t j = 0; j < i; ++j) {
        const double v = values_(i, j);
        if (!std::isfinite(v) || v < 0.0)
          throw InvalidArgument("DistanceMatrix: negative or non-finite entry");
        if (v != values_(j, i)) throw InvalidArgument("DistanceMatrix: not symmetric");
      }
    }
  }

  std::size_t size() const { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const { return values_; }

  double max_entry() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) m = std::max(m, values_.data()[i]);
    return m;
  }

  // Median of the off-diagonal entries (n = 1 has none; returns 0 then).
  double median_offdiag() const {
    std::vector<double> v;
    v.reserve(values_.size());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j)
        if (i != j) v.push_back(values_(i, j));
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  }

 private:
  Matrix values_;
};

// Euclidean distance between all point pairs.
inline DistanceMatrix pairwise_distances(const EmbeddingSet& set) {
  const Matrix& p = set.points();
  const std::size_t n = p.rows(), d = p.cols();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      const double* a = p.row(i);
      const double* b = p.row(j);
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
      }
      const double dist = std::sqrt(s);
      out(i, j) = dist;
      out(j, i) = dist;
    }
  }
  return DistanceMatrix(std::move(out));
}

// Partition by label; insertion follows first-appearance order of labels but
// the map itself is ordered by label for deterministic iteration.
inline std::map<std::string, EmbeddingSet> split_by_label(const EmbeddingSet& set) {
  if (!set.has_labels()) throw MissingLabels("split_by_label: set has no labels");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < set.size(); ++i) groups[set.labels()[i]].push_back(i);
  std::map<std::string, EmbeddingSet> out;
  for (const auto& [label, idx] : groups) {
    Matrix pts(idx.size(), set.dim());
    std::vector<std::string> labels(idx.size(), label);
    for (std::size_t r = 0; r < idx.size(); ++r)
      std::memcpy(pts.row(r), set.points().row(idx[r]), set.dim() * sizeof(double));
    out.emplace(label, EmbeddingSet(std::move(pts), std::move(labels)));
  }
  return out;
}

// Seeded subsample of at most k points, preserving labels.
inline EmbeddingSet subsample(const EmbeddingSet& set, std::size_t k, SeededRng& rng) {
  if (set.size() <= k) return set;
  auto idx = rng.sample_indices(set.size(), k);
  std::sort(idx.begin(), idx.end());
  Matrix pts(k, set.dim());
  for (std::size_t r = 0; r < k; ++r)
    std::memcpy(pts.row(r), set.points().row(idx[r]), set.dim() * sizeof(double));
  if (!set.has_labels()) return EmbeddingSet(std::move(pts));
  std::vector<std::string> labels(k);
  for (std::size_t r = 0; r < k; ++r) labels[r] = set.labels()[idx[r]];
  return EmbeddingSet(std::move(pts), std::move(labels));
}

enum class EmbeddingFormat { Csv, RawF64 };

namespace detail {

// %.17g round-trips IEEE doubles exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32le(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw MalformedFile(path + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64le(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64le(std::istream& is, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw MalformedFile(path + ": truncated payload");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline EmbeddingSet load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFile(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile(path + ": no header row");
  const auto header = detail::split_csv_line(line);
  const bool has_labels = !header.empty() && header[0] == "label";
  const std::size_t feature_cols = header.size() - (has_labels ? 1 : 0);
  if (feature_cols == 0) throw MalformedFile(path + ": header declares no feature columns");

  std::vector<double> values;
  std::vector<std::string> labels;
  std::size_t n = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw MalformedFile(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(header.size()) + " columns, got " +
                          std::to_string(cells.size()));
    std::size_t c0 = 0;
    if (has_labels) {
      labels.push_back(cells[0]);
      c0 = 1;
    }
    for (std::size_t c = c0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw MalformedFile(path + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell +
                            "'");
      values.push_back(v);
    }
    ++n;
  }
  if (n == 0) throw EmptyFile(path + ": no data rows");
  Matrix pts(n, feature_cols);
  std::memcpy(pts.data(), values.data(), values.size() * sizeof(double));
  if (has_labels) return EmbeddingSet(std::move(pts), std::move(labels));
  return EmbeddingSet(std::move(pts));
}

inline void save_embeddings_csv(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
  if (!out) throw MalformedFile(path + ": cannot open for writing");
  if (set.has_labels()) out << "label";
  for (std::size_t c = 0; c < set.dim(); ++c) {
    if (c > 0 || set.has_labels()) out << ',';
    out << 'f' << c;
  }
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.has_labels()) out << set.labels()[i];
    for (std::size_t c = 0; c < set.dim(); ++c) {
      if (c > 0 || set.has_labels()) out << ',';
      out << detail::format_double(set.points()(i, c));
    }
    out << '\n';
  }
}

inline constexpr char kRawMagic[4] = {'S', 'G', 'W', 'E'};

inline EmbeddingSet load_embeddings_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile(path + ": cannot open");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kRawMagic, 4) != 0)
    throw MalformedFile(path + ": bad magic, expected SGWE");
  const std::uint32_t n = detail::read_u32le(in, path);
  const std::uint32_t d = detail::read_u32le(in, path);
  unsigned char flag;
  if (!in.read(reinterpret_cast<char*>(&flag), 1)) throw MalformedFile(path + ": truncated header");
  if (n == 0) throw EmptyFile(path + ": n = 0");
  if (d == 0) throw MalformedFile(path + ": d = 0");
  Matrix pts(n, d);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i)
    pts.data()[i] = detail::read_f64le(in, path);
  if (!flag) return EmbeddingSet(std::move(pts));
  std::vector<std::string> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = detail::read_u32le(in, path);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw MalformedFile(path + ": truncated label");
    labels[i] = std::move(s);
  }
  return EmbeddingSet(std::move(pts), std::move(labels));
}

inline void save_embeddings_raw(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedFile(path + ": cannot open for writing");
  out.write(kRawMagic, 4);
  detail::write_u32le(out, static_cast<std::uint32_t>(set.size()));
  detail::write_u32le(out, static_cast<std::uint32_t>(set.dim()));
  const unsigned char flag = set.has_labels() ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&flag), 1);
  for (std::size_t i = 0; i < set.size() * set.dim(); ++i)
    detail::write_f64le(out, set.points().data()[i]);
  if (set.has_labels()) {
    for (const auto& s : set.labels()) {
      detail::write_u32le(out, static_cast<std::uint32_t>(s.size()));
      out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
  }
}

inline EmbeddingSet load_embeddings(const std::string& path, EmbeddingFormat fmt) {
  return fmt == EmbeddingFormat::Csv ? load_embeddings_csv(path) : load_embeddings_raw(path);
}

inline void save_embeddings(const EmbeddingSet& set, const std::string& path,
                            EmbeddingFormat fmt) {
  if (fmt == EmbeddingFormat::Csv)
    save_embeddings_csv(set, path);
  else
    save_embeddings_raw(set, path);
}

// Sniff the format: raw files start with the SGWE magic.
inline EmbeddingSet load_embeddings_auto(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile(path + ": cannot open");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  if (std::memcmp(magic, kRawMagic, 4) == 0) return load_embeddings_raw(path);
  return load_embeddings_csv(path);
}

}  // namespace sgw
