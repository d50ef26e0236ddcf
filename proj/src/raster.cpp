#include "schoolconn/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"

namespace schoolconn {

RasterLayer::RasterLayer(RasterGrid values, double xll, double yll, double cellsize, double nodata)
    : values_(std::move(values)), xll_(xll), yll_(yll), cellsize_(cellsize), nodata_(nodata) {
  if (values_.rows() <= 0 || values_.cols() <= 0) {
    fail(ErrorKind::DimensionMismatch, "raster must have positive dimensions");
  }
  if (!(cellsize_ > 0.0) || !std::isfinite(cellsize_)) {
    fail(ErrorKind::ParseError, "raster cellsize must be positive");
  }
}

void RasterLayer::set_categorical(std::vector<int> legend) {
  std::sort(legend.begin(), legend.end());
  legend.erase(std::unique(legend.begin(), legend.end()), legend.end());
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    double v = values_.data()[i];
    if (is_nodata(v)) continue;
    double rounded = std::round(v);
    if (rounded != v || !std::binary_search(legend.begin(), legend.end(), static_cast<int>(rounded))) {
      fail(ErrorKind::UnknownClass, "categorical raster value " + csv::format_double(v) +
                                        " is not in the legend");
    }
  }
  legend_ = std::move(legend);
  kind_ = LayerKind::Categorical;
}

namespace {

struct Tokenizer {
  std::string_view text;
  std::string_view source;
  std::size_t pos = 0;
  std::size_t line = 1;

  // Returns empty view at end of input.
  std::string_view next() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return text.substr(start, pos - start);
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::ParseError, std::string(source) + ":" + std::to_string(line) + ": " + msg);
  }
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double header_value(Tokenizer& tok, std::string_view key) {
  std::string_view name = tok.next();
  if (name.empty()) tok.error("unexpected end of file, expected '" + std::string(key) + "'");
  if (lower(name) != key) {
    tok.error("expected header '" + std::string(key) + "', found '" + std::string(name) + "'");
  }
  std::string_view value = tok.next();
  if (value.empty()) tok.error("missing value for '" + std::string(key) + "'");
  try {
    return csv::parse_double(value, key);
  } catch (const Error& e) {
    tok.error(e.what());
  }
}

Eigen::Index header_count(Tokenizer& tok, std::string_view key) {
  double v = header_value(tok, key);
  if (!(v >= 1.0) || std::floor(v) != v) tok.error("'" + std::string(key) + "' must be a positive integer");
  return static_cast<Eigen::Index>(v);
}

}  // namespace

RasterLayer parse_raster_text(std::string_view text, std::string_view source) {
  Tokenizer tok{text, source};
  const Eigen::Index ncols = header_count(tok, "ncols");
  const Eigen::Index nrows = header_count(tok, "nrows");
  const double xll = header_value(tok, "xllcorner");
  const double yll = header_value(tok, "yllcorner");
  const double cellsize = header_value(tok, "cellsize");
  const double nodata = header_value(tok, "nodata_value");
  if (!(cellsize > 0.0)) tok.error("cellsize must be positive");

  const Eigen::Index expected = ncols * nrows;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(expected));
  for (std::string_view t = tok.next(); !t.empty(); t = tok.next()) {
    try {
      values.push_back(csv::parse_double(t, "raster value"));
    } catch (const Error& e) {
      tok.error(e.what());
    }
  }
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    fail(ErrorKind::DimensionMismatch, std::string(source) + ": header declares " +
                                           std::to_string(ncols) + "x" + std::to_string(nrows) +
                                           " cells but " + std::to_string(values.size()) +
                                           " values were found");
  }
  RasterGrid grid = Eigen::Map<RasterGrid>(values.data(), nrows, ncols);
  return RasterLayer(std::move(grid), xll, yll, cellsize, nodata);
}

RasterLayer parse_raster(const std::filesystem::path& path) {
  return parse_raster_text(csv::read_text_file(path), path.string());
}

std::string write_raster_text(const RasterLayer& raster) {
  std::ostringstream out;
  out << "ncols " << raster.ncols() << '\n'
      << "nrows " << raster.nrows() << '\n'
      << "xllcorner " << csv::format_double(raster.xll()) << '\n'
      << "yllcorner " << csv::format_double(raster.yll()) << '\n'
      << "cellsize " << csv::format_double(raster.cellsize()) << '\n'
      << "NODATA_value " << csv::format_double(raster.nodata()) << '\n';
  for (Eigen::Index r = 0; r < raster.nrows(); ++r) {
    for (Eigen::Index c = 0; c < raster.ncols(); ++c) {
      if (c) out << ' ';
      out << csv::format_double(raster.at(r, c));
    }
    out << '\n';
  }
  return out.str();
}

void write_raster(const RasterLayer& raster, const std::filesystem::path& path) {
  csv::write_text_file(path, write_raster_text(raster));
}

}  // namespace schoolconn
