#pragma once

#include <Eigen/Core>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schoolconn/geo.hpp"

namespace schoolconn {

enum class LayerKind { Continuous, Categorical };

using RasterGrid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Georeferenced regular lon/lat grid. Row 0 is the northernmost row;
/// pixel (r, c) is addressed by its centre coordinate.
class RasterLayer {
 public:
  RasterLayer() = default;
  RasterLayer(RasterGrid values, double xll, double yll, double cellsize, double nodata);

  Eigen::Index nrows() const noexcept { return values_.rows(); }
  Eigen::Index ncols() const noexcept { return values_.cols(); }
  double xll() const noexcept { return xll_; }
  double yll() const noexcept { return yll_; }
  double cellsize() const noexcept { return cellsize_; }
  double nodata() const noexcept { return nodata_; }
  const RasterGrid& values() const noexcept { return values_; }
  double at(Eigen::Index row, Eigen::Index col) const { return values_(row, col); }

  LayerKind kind() const noexcept { return kind_; }
  const std::vector<int>& legend() const noexcept { return legend_; }

  /// Marks the layer categorical. Throws UnknownClass if any non-nodata
  /// value is not a legend id.
  void set_categorical(std::vector<int> legend);

  bool is_nodata(double v) const noexcept { return v == nodata_ || std::isnan(v); }

  GeoPoint pixel_center(Eigen::Index row, Eigen::Index col) const noexcept {
    return {xll_ + (static_cast<double>(col) + 0.5) * cellsize_,
            yll_ + (static_cast<double>(nrows() - row) - 0.5) * cellsize_};
  }

  double xmax() const noexcept { return xll_ + static_cast<double>(ncols()) * cellsize_; }
  double ymax() const noexcept { return yll_ + static_cast<double>(nrows()) * cellsize_; }

 private:
  RasterGrid values_;
  double xll_ = 0.0;
  double yll_ = 0.0;
  double cellsize_ = 1.0;
  double nodata_ = -9999.0;
  LayerKind kind_ = LayerKind::Continuous;
  std::vector<int> legend_;
};

RasterLayer parse_raster_text(std::string_view text, std::string_view source = "<memory>");
RasterLayer parse_raster(const std::filesystem::path& path);

std::string write_raster_text(const RasterLayer& raster);
void write_raster(const RasterLayer& raster, const std::filesystem::path& path);

}  // namespace schoolconn
