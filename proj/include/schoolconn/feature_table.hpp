#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace schoolconn {

/// Dense numeric feature matrix keyed by school id. Rows are schools,
/// columns are named features; an optional 0/1 label column rides along
/// (1 = connected).
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<std::string> ids, std::vector<std::string> names, Eigen::MatrixXd values,
               std::optional<Eigen::VectorXi> labels = std::nullopt);

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  bool has_labels() const noexcept { return labels_.has_value(); }
  const Eigen::VectorXi& labels() const;  // throws MissingColumn when absent

  std::optional<Eigen::Index> column_index(std::string_view name) const;
  Eigen::Index require_column(std::string_view name) const;  // UnknownColumn

  FeatureTable select_rows(std::span<const Eigen::Index> rows) const;
  /// Columns reordered/subset by name; UnknownColumn when any is absent.
  FeatureTable select_columns(std::span<const std::string> names) const;
  FeatureTable with_values(Eigen::MatrixXd values) const;  // same ids/names/labels
  FeatureTable with_labels(std::optional<Eigen::VectorXi> labels) const;
  /// Appends columns on the right; names must not collide.
  FeatureTable append_columns(std::span<const std::string> names, const Eigen::MatrixXd& block) const;

  std::string to_csv() const;
  static FeatureTable from_csv(std::string_view text, std::string_view source = "<memory>");
  void write_csv(const std::filesystem::path& path) const;
  static FeatureTable read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> names_;
  Eigen::MatrixXd values_;
  std::optional<Eigen::VectorXi> labels_;
};

}  // namespace schoolconn
