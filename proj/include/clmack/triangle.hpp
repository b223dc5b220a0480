#pragma once

#include <clmack/detail/text.hpp>
#include <clmack/error.hpp>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace clmack {

/// Square T x T array of cumulative claims C_{i,t} with the run-off mask.
///
/// Accident year i and development year t are 1-based throughout the
/// public interface. Cell (i,t) is observed iff i + t <= T + 1. Unobserved
/// cells may carry values (a simulated full square) or be NaN (a triangle
/// read from file); estimators only ever read observed cells.
class Triangle {
public:
  Triangle() = default;

  /// Builds from a full T x T cumulative array in row-major order.
  /// Observed cells must be finite and non-negative; unobserved cells are
  /// either all finite and non-negative or NaN.
  static Triangle from_cumulative(std::size_t size, std::vector<double> cells) {
    if (size == 0) throw InvalidInput("triangle size must be positive");
    if (cells.size() != size * size)
      throw InvalidInput("cumulative array has " + std::to_string(cells.size()) +
                         " entries, expected " + std::to_string(size * size));
    Triangle tri;
    tri.size_ = size;
    tri.cells_ = std::move(cells);
    for (std::size_t i = 1; i <= size; ++i) {
      for (std::size_t t = 1; t <= size; ++t) {
        double v = tri(i, t);
        bool ok = std::isfinite(v) && v >= 0.0;
        if (!ok && (tri.observed(i, t) || !std::isnan(v)))
          throw InvalidInput("invalid cumulative value at (" + std::to_string(i) +
                             "," + std::to_string(t) + ")");
      }
    }
    return tri;
  }

  /// Cumulates a square of non-negative increments along each row.
  static Triangle from_incremental(const std::vector<std::vector<double>>& inc) {
    const std::size_t n = inc.size();
    if (n == 0) throw InvalidInput("incremental array is empty");
    std::vector<double> cells(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      if (inc[i].size() != n)
        throw InvalidInput("incremental array is not square (row " + std::to_string(i + 1) +
                           " has " + std::to_string(inc[i].size()) + " entries)");
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        double x = inc[i][t];
        if (!std::isfinite(x) || x < 0.0)
          throw InvalidInput("negative or non-finite increment at (" + std::to_string(i + 1) +
                             "," + std::to_string(t + 1) + ")");
        acc += x;
        cells[i * n + t] = acc;
      }
    }
    return from_cumulative(n, std::move(cells));
  }

  std::size_t size() const noexcept { return size_; }

  double operator()(std::size_t i, std::size_t t) const { return cells_[index(i, t)]; }

  bool observed(std::size_t i, std::size_t t) const noexcept { return i + t <= size_ + 1; }

  /// Development year of the latest observed cell in row i.
  std::size_t diagonal(std::size_t i) const noexcept { return size_ - i + 1; }

  /// C_{i,T-i+1}.
  double latest(std::size_t i) const { return (*this)(i, diagonal(i)); }

  /// True when every cell, observed or not, holds a value.
  bool full() const {
    for (double v : cells_)
      if (std::isnan(v)) return false;
    return true;
  }

  const std::vector<double>& cells() const noexcept { return cells_; }

  /// Row differences; unobserved NaN cells stay NaN.
  std::vector<std::vector<double>> to_incremental() const {
    std::vector<std::vector<double>> inc(size_, std::vector<double>(size_));
    for (std::size_t i = 1; i <= size_; ++i) {
      inc[i - 1][0] = (*this)(i, 1);
      for (std::size_t t = 2; t <= size_; ++t) inc[i - 1][t - 1] = (*this)(i, t) - (*this)(i, t - 1);
    }
    return inc;
  }

  Triangle scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("scale factor must be positive");
    Triangle out = *this;
    for (double& v : out.cells_) v *= c;
    return out;
  }

  /// Same observed cells, unobserved cells set to NaN.
  Triangle observed_only() const {
    Triangle out = *this;
    for (std::size_t i = 1; i <= size_; ++i)
      for (std::size_t t = 1; t <= size_; ++t)
        if (!observed(i, t)) out.cells_[index(i, t)] = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  friend bool operator==(const Triangle& a, const Triangle& b) {
    if (a.size_ != b.size_) return false;
    for (std::size_t k = 0; k < a.cells_.size(); ++k) {
      double x = a.cells_[k], y = b.cells_[k];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
  }

private:
  std::size_t index(std::size_t i, std::size_t t) const { return (i - 1) * size_ + (t - 1); }

  std::size_t size_ = 0;
  std::vector<double> cells_;
};

/// Parses the run-off CSV layout:
///
///     dev_1,dev_2,...,dev_T
///     accident_1,v,v,...,v
///     accident_2,v,...,v,
///     ...
///
/// Row i holds its label (accident_i, or plain i) followed by T fields, of
/// which exactly the first T-i+1 are filled. A leading label column in the
/// header is tolerated.
inline Triangle parse_csv(std::istream& in) {
  using detail::split;
  using detail::trim;

  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw InvalidInput("triangle CSV is empty");

  auto header = split(trim(lines[0]), ',');
  if (!header.empty() && trim(header[0]) != "dev_1") header.erase(header.begin());
  const std::size_t n = header.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (trim(header[t]) != "dev_" + std::to_string(t + 1))
      throw InvalidInput("header field " + std::to_string(t + 1) + " should be dev_" +
                         std::to_string(t + 1));
  }
  if (lines.size() - 1 != n)
    throw InvalidInput("expected " + std::to_string(n) + " accident-year rows, found " +
                       std::to_string(lines.size() - 1));

  std::vector<double> cells(n * n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i <= n; ++i) {
    auto fields = split(trim(lines[i]), ',');
    if (fields.size() != n + 1)
      throw InvalidInput("ragged row " + std::to_string(i) + ": " + std::to_string(fields.size()) +
                         " fields, expected " + std::to_string(n + 1));
    auto label = trim(fields[0]);
    if (label.starts_with("accident_")) label.remove_prefix(9);
    auto idx = detail::parse_int(label);
    if (!idx || *idx != static_cast<long long>(i))
      throw InvalidInput("row " + std::to_string(i) + " has label '" + std::string(fields[0]) + "'");
    for (std::size_t t = 1; t <= n; ++t) {
      auto field = trim(fields[t]);
      const bool obs = i + t <= n + 1;
      const std::string where = "(" + std::to_string(i) + "," + std::to_string(t) + ")";
      if (obs) {
        if (field.empty()) throw InvalidInput("missing observed cell " + where);
        auto v = detail::parse_double(field);
        if (!v) throw InvalidInput("non-numeric observed cell " + where);
        if (!std::isfinite(*v) || *v < 0.0) throw InvalidInput("invalid value in cell " + where);
        cells[(i - 1) * n + (t - 1)] = *v;
      } else if (!field.empty()) {
        throw InvalidInput("value in unobserved cell " + where);
      }
    }
  }
  return Triangle::from_cumulative(n, std::move(cells));
}

inline Triangle load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open triangle file " + path.string());
  return parse_csv(in);
}

/// Writes observed cells only; see parse_csv for the layout.
inline void write_csv(std::ostream& out, const Triangle& tri) {
  const std::size_t n = tri.size();
  for (std::size_t t = 1; t <= n; ++t) out << (t > 1 ? "," : "") << "dev_" << t;
  out << '\n';
  for (std::size_t i = 1; i <= n; ++i) {
    out << "accident_" << i;
    for (std::size_t t = 1; t <= n; ++t) {
      out << ',';
      if (tri.observed(i, t)) out << detail::format_double(tri(i, t));
    }
    out << '\n';
  }
}

inline void save_csv(const Triangle& tri, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write triangle file " + path.string());
  write_csv(out, tri);
}

inline std::string to_csv_string(const Triangle& tri) {
  std::ostringstream os;
  write_csv(os, tri);
  return os.str();
}

} // namespace clmack
