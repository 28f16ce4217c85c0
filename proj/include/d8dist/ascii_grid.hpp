#pragma once

// Reader and writer for ESRI ASCII grids (.asc).
//
//   ncols        4
//   nrows        2
//   xllcorner    0
//   yllcorner    0
//   cellsize     1
//   NODATA_value -9999
//   1 2 3 4
//   5 6 7 8
//
// Keys are case-insensitive and NODATA_value is optional. Body rows are
// written north first.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "d8.hpp"
#include "grid.hpp"

namespace d8dist {

class GridFormatError : public std::runtime_error {
 public:
  GridFormatError(const std::string &path, std::size_t line, const std::string &what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::optional<double> parse_double(std::string_view tok) {
  double v     = 0;
  const char *b = tok.data();
  const char *e = tok.data() + tok.size();
  if (b != e && *b == '+')
    ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline void write_header(std::ostream &os, const GridHeader &h) {
  os << "ncols " << h.ncols << '\n'
     << "nrows " << h.nrows << '\n'
     << "xllcorner " << format_double(h.xllcorner) << '\n'
     << "yllcorner " << format_double(h.yllcorner) << '\n'
     << "cellsize " << format_double(h.cellsize) << '\n'
     << "NODATA_value " << format_double(h.nodata_value) << '\n';
}

template <class CellFormatter>
void write_grid_file(const std::filesystem::path &path, const GridHeader &h, CellFormatter &&fmt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw IoError("cannot open '" + path.string() + "' for writing");
  write_header(os, h);
  std::string line;
  for (int r = 0; r < h.nrows; r++) {
    line.clear();
    for (int c = 0; c < h.ncols; c++) {
      if (c)
        line += ' ';
      line += fmt(r, c);
    }
    line += '\n';
    os << line;
  }
  os.flush();
  if (!os)
    throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Parses an ESRI ASCII grid. Format problems raise GridFormatError carrying
/// the offending line number; an unreadable file raises IoError.
inline ElevationGrid load_ascii_grid(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << is.rdbuf();
  if (is.bad())
    throw IoError("read failed for '" + path.string() + "'");
  const std::string text = ss.str();
  const std::string name = path.string();

  std::map<std::string, std::pair<double, std::size_t>> header;
  std::vector<double> values;
  bool in_body            = false;
  std::size_t line_no     = 0;
  std::size_t last_line   = 0;
  std::size_t pos         = 0;
  std::optional<double> nodata;
  long long expected      = -1;

  auto finish_header = [&](std::size_t line) {
    static constexpr std::array<const char *, 5> required = {"ncols", "nrows", "xllcorner",
                                                             "yllcorner", "cellsize"};
    for (const char *k : required)
      if (!header.count(k))
        throw GridFormatError(name, line, std::string("missing header key '") + k + "'");
    for (const char *k : {"ncols", "nrows"}) {
      const double v = header[k].first;
      if (v < 1 || v != std::floor(v) || v > 1e9)
        throw GridFormatError(name, header[k].second,
                              std::string("'") + k + "' must be a positive integer");
    }
    expected = static_cast<long long>(header["ncols"].first) *
               static_cast<long long>(header["nrows"].first);
    values.reserve(static_cast<std::size_t>(expected));
    if (header.count("nodata_value"))
      nodata = header["nodata_value"].first;
    in_body = true;
  };

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos)
      eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    std::size_t i = 0;
    auto next_token = [&]() -> std::string_view {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      const std::size_t b = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      return line.substr(b, i - b);
    };

    std::string_view tok = next_token();
    if (tok.empty())
      continue;
    last_line = line_no;

    if (!in_body && std::isalpha(static_cast<unsigned char>(tok[0]))) {
      const std::string key = detail::lower(tok);
      static constexpr std::array<const char *, 6> known = {
          "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
      if (std::find_if(known.begin(), known.end(), [&](const char *k) { return key == k; }) ==
          known.end())
        throw GridFormatError(name, line_no, "unknown header key '" + std::string(tok) + "'");
      if (header.count(key))
        throw GridFormatError(name, line_no, "duplicate header key '" + std::string(tok) + "'");
      const std::string_view val_tok = next_token();
      const auto val                 = detail::parse_double(val_tok);
      if (!val || !std::isfinite(*val))
        throw GridFormatError(name, line_no, "unparseable value for '" + std::string(tok) + "'");
      if (!next_token().empty())
        throw GridFormatError(name, line_no, "trailing text after header value");
      header[key] = {*val, line_no};
      continue;
    }

    if (!in_body)
      finish_header(line_no);

    for (; !tok.empty(); tok = next_token()) {
      const auto v = detail::parse_double(tok);
      if (!v)
        throw GridFormatError(name, line_no, "unparseable number '" + std::string(tok) + "'");
      if (!std::isfinite(*v))
        throw GridFormatError(name, line_no, "non-finite value '" + std::string(tok) + "'");
      if (static_cast<long long>(values.size()) >= expected)
        throw GridFormatError(name, line_no,
                              "cell count mismatch: more than " + std::to_string(expected) +
                                  " values");
      values.push_back(*v);
    }
  }

  if (!in_body)
    finish_header(line_no);
  if (static_cast<long long>(values.size()) != expected)
    throw GridFormatError(name, last_line,
                          "cell count mismatch: expected " + std::to_string(expected) + ", got " +
                              std::to_string(values.size()));

  const int ncols = static_cast<int>(header["ncols"].first);
  const int nrows = static_cast<int>(header["nrows"].first);
  ElevationGrid grid(nrows, ncols, std::move(values), nodata.value_or(-9999.0));
  grid.set_georef(header["xllcorner"].first, header["yllcorner"].first, header["cellsize"].first);
  return grid;
}

inline void save_ascii_grid(const ElevationGrid &grid, const std::filesystem::path &path) {
  detail::write_grid_file(path, grid.header(),
                          [&](int r, int c) { return detail::format_double(grid(r, c)); });
}

//Areas are whole cell counts and are written as unsigned integers. `header`
//supplies georeferencing; its dimensions are overridden by the grid's.
inline void save_ascii_grid(const AreaGrid &grid, const std::filesystem::path &path,
                            GridHeader header = {}) {
  header.ncols = grid.cols;
  header.nrows = grid.rows;
  detail::write_grid_file(path, header, [&](int r, int c) { return std::to_string(grid(r, c)); });
}

//ESRI D8 direction codes. Nodata cells are written as the header's nodata
//value.
inline void save_flowdir_grid(const FlowField &flow, const std::filesystem::path &path,
                              GridHeader header = {}) {
  header.ncols = flow.cols;
  header.nrows = flow.rows;
  const std::string nodata = detail::format_double(header.nodata_value);
  detail::write_grid_file(path, header, [&](int r, int c) {
    return flow.valid(r, c) ? std::to_string(esri_code(flow(r, c))) : nodata;
  });
}

}  // namespace d8dist
