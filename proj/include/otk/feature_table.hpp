/* otk/feature_table.hpp
 *
 * Column-typed feature tables. Scalar cells use NaN as the explicit null;
 * vector cells carry 1..3 components (angular quantities are scalars in
 * 2D) with dimension 0 as null. Aggregation emits
 * <child>_<feature>_<stat> columns with nulls dropped, and a population
 * standard deviation so single children aggregate to std 0.
 */

#ifndef OTK_FEATURE_TABLE_HPP
#define OTK_FEATURE_TABLE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otk {

inline constexpr double kNullFeature = std::numeric_limits<double>::quiet_NaN();

struct VectorCell {
  std::array<double, 3> v = {0, 0, 0};
  std::int8_t dim = 0;  // 0 = null
};

class FeatureTable {
 public:
  enum class ColKind : std::uint8_t { Int, Scalar, Vector };

  int add_column(std::string name, ColKind kind, bool aggregatable = false) {
    Column c;
    c.name = std::move(name);
    c.kind = kind;
    c.aggregatable = aggregatable && kind == ColKind::Scalar;
    if (kind == ColKind::Int) c.ints.assign(n_rows_, 0);
    if (kind == ColKind::Scalar) c.scalars.assign(n_rows_, kNullFeature);
    if (kind == ColKind::Vector) c.vectors.assign(n_rows_, VectorCell{});
    cols_.push_back(std::move(c));
    return static_cast<int>(cols_.size()) - 1;
  }

  void add_rows(std::size_t n) {
    n_rows_ += n;
    for (Column& c : cols_) {
      if (c.kind == ColKind::Int) c.ints.resize(n_rows_, 0);
      if (c.kind == ColKind::Scalar) c.scalars.resize(n_rows_, kNullFeature);
      if (c.kind == ColKind::Vector) c.vectors.resize(n_rows_, VectorCell{});
    }
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t columns() const { return cols_.size(); }
  const std::string& name(int c) const { return cols_[c].name; }
  ColKind kind(int c) const { return cols_[c].kind; }
  bool aggregatable(int c) const { return cols_[c].aggregatable; }

  void set_int(std::size_t r, int c, std::int64_t v) { cols_[c].ints[r] = v; }
  void set_scalar(std::size_t r, int c, double v) { cols_[c].scalars[r] = v; }
  void set_vector(std::size_t r, int c, const Eigen::Vector3d& v, int dim) {
    VectorCell cell;
    cell.dim = static_cast<std::int8_t>(dim);
    // store the trailing `dim` components of the (z, y, x) vector
    for (int i = 0; i < dim; ++i) cell.v[i] = v[3 - dim + i];
    cols_[c].vectors[r] = cell;
  }
  void set_vector1(std::size_t r, int c, double v) {
    VectorCell cell;
    cell.dim = 1;
    cell.v[0] = v;
    cols_[c].vectors[r] = cell;
  }

  std::int64_t get_int(std::size_t r, int c) const { return cols_[c].ints[r]; }
  double get_scalar(std::size_t r, int c) const { return cols_[c].scalars[r]; }
  const VectorCell& get_vector(std::size_t r, int c) const {
    return cols_[c].vectors[r];
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < cols_.size(); ++i)
      if (cols_[i].name == name) return static_cast<int>(i);
    return -1;
  }

 private:
  struct Column {
    std::string name;
    ColKind kind = ColKind::Scalar;
    bool aggregatable = false;
    std::vector<std::int64_t> ints;
    std::vector<double> scalars;
    std::vector<VectorCell> vectors;
  };
  std::vector<Column> cols_;
  std::size_t n_rows_ = 0;
};

struct AggStats {
  double mean = kNullFeature;
  double median = kNullFeature;
  double min = kNullFeature;
  double max = kNullFeature;
  double std = kNullFeature;
  double sum = kNullFeature;
};

inline constexpr std::array<const char*, 6> kAggSuffixes = {
    "mean", "median", "min", "max", "std", "sum"};

inline AggStats aggregate_values(std::span<const double> raw) {
  std::vector<double> v;
  v.reserve(raw.size());
  for (double x : raw)
    if (!std::isnan(x)) v.push_back(x);
  AggStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  double sum = 0.0, sum2 = 0.0;
  for (double x : v) {
    sum += x;
    sum2 += x * x;
  }
  s.sum = sum;
  s.mean = sum / static_cast<double>(n);
  s.min = v.front();
  s.max = v.back();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - s.mean * s.mean);
  s.std = std::sqrt(var);
  return s;
}

// Appends <prefix>_<feature>_<stat> columns to `parent` for every
// aggregatable scalar column of `child`, reducing over each parent row's
// member rows in the child table.
inline void append_aggregates(FeatureTable& parent, const FeatureTable& child,
                              const std::string& prefix,
                              std::span<const std::vector<std::size_t>> members) {
  if (members.size() != parent.rows())
    throw std::invalid_argument("append_aggregates: member list size mismatch");
  for (int c = 0; c < static_cast<int>(child.columns()); ++c) {
    if (!child.aggregatable(c)) continue;
    std::array<int, 6> out_cols;
    for (int s = 0; s < 6; ++s)
      out_cols[s] = parent.add_column(
          prefix + "_" + child.name(c) + "_" + kAggSuffixes[s],
          FeatureTable::ColKind::Scalar);
    std::vector<double> vals;
    for (std::size_t r = 0; r < parent.rows(); ++r) {
      vals.clear();
      for (std::size_t m : members[r]) vals.push_back(child.get_scalar(m, c));
      const AggStats s = aggregate_values(vals);
      parent.set_scalar(r, out_cols[0], s.mean);
      parent.set_scalar(r, out_cols[1], s.median);
      parent.set_scalar(r, out_cols[2], s.min);
      parent.set_scalar(r, out_cols[3], s.max);
      parent.set_scalar(r, out_cols[4], s.std);
      parent.set_scalar(r, out_cols[5], s.sum);
    }
  }
}

}  // namespace otk

#endif  // OTK_FEATURE_TABLE_HPP
