#pragma once

// Shared helpers for the unit tests: error-kind capture, scratch
// directories and a few brute-force oracles.

#include <filesystem>
#include <optional>
#include <string>

#include "schoolconn/error.hpp"
#include "schoolconn/raster.hpp"
#include "schoolconn/rng.hpp"

namespace testing {

template <typename F>
std::optional<schoolconn::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const schoolconn::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

template <typename F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const schoolconn::Error& e) {
    return e.what();
  }
  return {};
}

// Fresh empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("schoolconn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline schoolconn::RasterLayer random_raster(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols, double xll,
                                             double yll, double cellsize, double lo = 0.0, double hi = 100.0) {
  schoolconn::SplitMix64 rng(seed);
  schoolconn::RasterGrid g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = rng.uniform(lo, hi);
  return schoolconn::RasterLayer(g, xll, yll, cellsize, -9999.0);
}

}  // namespace testing

#define CHECK_ERROR_KIND(expr, expected)                                     \
  do {                                                                       \
    auto kind_ = ::testing::error_kind([&] { (void)(expr); });               \
    CHECK_MESSAGE(kind_.has_value(), "expected an error from " #expr);       \
    if (kind_) CHECK(schoolconn::to_string(*kind_) == schoolconn::to_string(expected)); \
  } while (0)
