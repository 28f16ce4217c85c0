#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace d8dist {

/// A cell position in global DEM coordinates. Row 0 is the north edge.
struct CellId {
  int row = 0;
  int col = 0;

  friend bool operator==(const CellId &, const CellId &) = default;
  friend auto operator<=>(const CellId &, const CellId &) = default;
};

/// Georeferencing carried through I/O. Only `ncols`/`nrows` matter to the
/// algorithms; the rest is round-tripped untouched.
struct GridHeader {
  int ncols = 0;
  int nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  double nodata_value = -9999.0;
};

//Row-major raster of elevations. A cell whose value equals `nodata_value`
//exactly is outside the DEM.
class ElevationGrid {
 public:
  ElevationGrid() = default;

  ElevationGrid(int rows, int cols, double fill = 0.0, double nodata = -9999.0)
      : rows_(rows), cols_(cols), nodata_(nodata) {
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("ElevationGrid: rows and cols must be >= 1");
    values_.assign(static_cast<std::size_t>(rows) * cols, fill);
  }

  ElevationGrid(int rows, int cols, std::vector<double> values, double nodata = -9999.0)
      : rows_(rows), cols_(cols), nodata_(nodata), values_(std::move(values)) {
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("ElevationGrid: rows and cols must be >= 1");
    if (values_.size() != static_cast<std::size_t>(rows) * cols)
      throw std::invalid_argument("ElevationGrid: value count does not match dimensions");
    for (const double v : values_)
      if (!std::isfinite(v) && v != nodata_)
        throw std::invalid_argument("ElevationGrid: non-finite elevation");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double nodata() const { return nodata_; }
  double cellsize() const { return cellsize_; }
  double xllcorner() const { return xll_; }
  double yllcorner() const { return yll_; }

  void set_georef(double xll, double yll, double cellsize) {
    xll_      = xll;
    yll_      = yll;
    cellsize_ = cellsize;
  }

  GridHeader header() const { return {cols_, rows_, xll_, yll_, cellsize_, nodata_}; }

  bool in_grid(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }
  CellId cell(std::size_t i) const {
    return {static_cast<int>(i / cols_), static_cast<int>(i % cols_)};
  }

  double &operator()(int r, int c) { return values_[index(r, c)]; }
  double operator()(int r, int c) const { return values_[index(r, c)]; }
  double &operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool is_nodata(int r, int c) const { return values_[index(r, c)] == nodata_; }
  bool is_nodata(std::size_t i) const { return values_[i] == nodata_; }

  const std::vector<double> &values() const { return values_; }

  std::size_t data_cells() const {
    std::size_t n = 0;
    for (const double v : values_)
      if (v != nodata_)
        ++n;
    return n;
  }

  //Copies rows [first, last) into a new grid with identical georeferencing.
  ElevationGrid row_slice(int first, int last) const {
    if (first < 0 || last > rows_ || first >= last)
      throw std::out_of_range("ElevationGrid::row_slice: bad row range");
    std::vector<double> vals(values_.begin() + static_cast<std::ptrdiff_t>(index(first, 0)),
                             values_.begin() + static_cast<std::ptrdiff_t>(index(last, 0)));
    ElevationGrid out(last - first, cols_, std::move(vals), nodata_);
    out.set_georef(xll_, yll_, cellsize_);
    return out;
  }

  friend bool operator==(const ElevationGrid &a, const ElevationGrid &b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.nodata_ != b.nodata_)
      return false;
    for (std::size_t i = 0; i < a.values_.size(); i++)
      if (a.values_[i] != b.values_[i])
        return false;
    return true;
  }

 private:
  int rows_       = 0;
  int cols_       = 0;
  double nodata_  = -9999.0;
  double cellsize_ = 1.0;
  double xll_     = 0.0;
  double yll_     = 0.0;
  std::vector<double> values_;
};

struct RowRange {
  int begin = 0;
  int end   = 0;  //exclusive

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(int r) const { return r >= begin && r < end; }

  friend bool operator==(const RowRange &, const RowRange &) = default;
};

/// One worker's horizontal band: the rows it owns plus up to two read-only
/// halo rows on each side, clipped at the DEM border.
struct StripSpec {
  int worker_id = 0;
  int workers   = 1;
  RowRange owned;
  RowRange halo_above;
  RowRange halo_below;

  int top_row() const { return owned.begin; }
  int bottom_row() const { return owned.end - 1; }

  //A neighbouring worker exists across the top / bottom edge.
  bool has_worker_above() const { return worker_id > 0; }
  bool has_worker_below() const { return worker_id + 1 < workers; }

  //Rows whose elevations the worker reads.
  RowRange loaded() const { return {halo_above.empty() ? owned.begin : halo_above.begin,
                                    halo_below.empty() ? owned.end : halo_below.end}; }

  friend bool operator==(const StripSpec &, const StripSpec &) = default;
};

inline constexpr int kHaloDepth = 2;

//Every worker owns floor(rows/S) rows; the final worker also takes the
//remainder.
inline std::vector<StripSpec> partition_strips(int rows, int workers) {
  if (workers < 1)
    throw std::invalid_argument("partition_strips: need at least one worker");
  if (rows < 1)
    throw std::invalid_argument("partition_strips: need at least one row");
  if (workers > rows)
    throw std::invalid_argument("partition_strips: more workers (" + std::to_string(workers) +
                                ") than rows (" + std::to_string(rows) + ")");

  const int per = rows / workers;
  std::vector<StripSpec> strips;
  strips.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; w++) {
    StripSpec s;
    s.worker_id    = w;
    s.workers      = workers;
    s.owned.begin  = w * per;
    s.owned.end    = (w == workers - 1) ? rows : (w + 1) * per;
    s.halo_above   = {std::max(0, s.owned.begin - kHaloDepth), s.owned.begin};
    s.halo_below   = {s.owned.end, std::min(rows, s.owned.end + kHaloDepth)};
    strips.push_back(s);
  }
  return strips;
}

//Index of the strip owning `row`.
inline int strip_of_row(const std::vector<StripSpec> &strips, int row) {
  for (const auto &s : strips)
    if (s.owned.contains(row))
      return s.worker_id;
  throw std::out_of_range("strip_of_row: row " + std::to_string(row) + " not owned");
}

}  // namespace d8dist

template <>
struct std::hash<d8dist::CellId> {
  std::size_t operator()(const d8dist::CellId &c) const noexcept {
    const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.row)) << 32) |
                     static_cast<std::uint32_t>(c.col);
    return std::hash<std::uint64_t>{}(key);
  }
};
