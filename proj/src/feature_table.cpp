#include "schoolconn/feature_table.hpp"

#include <sstream>
#include <unordered_set>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"

namespace schoolconn {

FeatureTable::FeatureTable(std::vector<std::string> ids, std::vector<std::string> names,
                           Eigen::MatrixXd values, std::optional<Eigen::VectorXi> labels)
    : ids_(std::move(ids)), names_(std::move(names)), values_(std::move(values)), labels_(std::move(labels)) {
  if (static_cast<Eigen::Index>(ids_.size()) != values_.rows()) {
    fail(ErrorKind::DimensionMismatch, "feature table: id count does not match row count");
  }
  if (static_cast<Eigen::Index>(names_.size()) != values_.cols()) {
    fail(ErrorKind::DimensionMismatch, "feature table: name count does not match column count");
  }
  if (labels_ && labels_->size() != values_.rows()) {
    fail(ErrorKind::DimensionMismatch, "feature table: label count does not match row count");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n == "id" || n == "label") fail(ErrorKind::ParseError, "reserved column name '" + n + "'");
    if (!seen.insert(n).second) fail(ErrorKind::ParseError, "duplicate column name '" + n + "'");
  }
  if (!values_.allFinite()) {
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
      for (Eigen::Index c = 0; c < values_.cols(); ++c) {
        if (!std::isfinite(values_(r, c))) {
          fail(ErrorKind::ParseError, "non-finite value in column '" + names_[c] + "' for id '" + ids_[r] + "'");
        }
      }
    }
  }
  if (labels_) {
    for (Eigen::Index r = 0; r < labels_->size(); ++r) {
      if ((*labels_)(r) != 0 && (*labels_)(r) != 1) fail(ErrorKind::ParseError, "labels must be 0 or 1");
    }
  }
}

const Eigen::VectorXi& FeatureTable::labels() const {
  if (!labels_) fail(ErrorKind::MissingColumn, "feature table has no label column");
  return *labels_;
}

std::optional<Eigen::Index> FeatureTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

Eigen::Index FeatureTable::require_column(std::string_view name) const {
  if (auto i = column_index(name)) return *i;
  fail(ErrorKind::UnknownColumn, "unknown column '" + std::string(name) + "'");
}

FeatureTable FeatureTable::select_rows(std::span<const Eigen::Index> rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), cols());
  std::optional<Eigen::VectorXi> labels;
  if (labels_) labels = Eigen::VectorXi(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    ids.push_back(ids_[static_cast<std::size_t>(r)]);
    values.row(static_cast<Eigen::Index>(i)) = values_.row(r);
    if (labels) (*labels)(static_cast<Eigen::Index>(i)) = (*labels_)(r);
  }
  return FeatureTable(std::move(ids), names_, std::move(values), std::move(labels));
}

FeatureTable FeatureTable::select_columns(std::span<const std::string> names) const {
  Eigen::MatrixXd values(rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    values.col(static_cast<Eigen::Index>(j)) = values_.col(require_column(names[j]));
  }
  return FeatureTable(ids_, std::vector<std::string>(names.begin(), names.end()), std::move(values), labels_);
}

FeatureTable FeatureTable::with_values(Eigen::MatrixXd values) const {
  return FeatureTable(ids_, names_, std::move(values), labels_);
}

FeatureTable FeatureTable::with_labels(std::optional<Eigen::VectorXi> labels) const {
  return FeatureTable(ids_, names_, values_, std::move(labels));
}

FeatureTable FeatureTable::append_columns(std::span<const std::string> names,
                                          const Eigen::MatrixXd& block) const {
  if (block.rows() != rows() || block.cols() != static_cast<Eigen::Index>(names.size())) {
    fail(ErrorKind::DimensionMismatch, "appended block has the wrong shape");
  }
  std::vector<std::string> all = names_;
  all.insert(all.end(), names.begin(), names.end());
  Eigen::MatrixXd values(rows(), cols() + block.cols());
  values << values_, block;
  return FeatureTable(ids_, std::move(all), std::move(values), labels_);
}

std::string FeatureTable::to_csv() const {
  std::ostringstream out;
  std::vector<std::string> header;
  header.reserve(names_.size() + 2);
  header.push_back("id");
  header.insert(header.end(), names_.begin(), names_.end());
  if (labels_) header.push_back("label");
  csv::write_row(out, header);
  std::vector<std::string> row;
  for (Eigen::Index r = 0; r < rows(); ++r) {
    row.clear();
    row.push_back(ids_[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < cols(); ++c) row.push_back(csv::format_double(values_(r, c)));
    if (labels_) row.push_back(std::to_string((*labels_)(r)));
    csv::write_row(out, row);
  }
  return out.str();
}

FeatureTable FeatureTable::from_csv(std::string_view text, std::string_view source) {
  csv::Document doc = csv::parse(text, source);
  if (doc.header.empty() || doc.header.front() != "id") {
    fail(ErrorKind::MissingColumn, std::string(source) + ": first column must be 'id'");
  }
  const bool has_label = doc.header.back() == "label";
  const std::size_t first = 1;
  const std::size_t last = doc.header.size() - (has_label ? 1 : 0);
  std::vector<std::string> names(doc.header.begin() + first, doc.header.begin() + last);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(doc.rows.size()), static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids;
  std::optional<Eigen::VectorXi> labels;
  if (has_label) labels = Eigen::VectorXi(static_cast<Eigen::Index>(doc.rows.size()));
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    ids.push_back(row[0]);
    const auto ri = static_cast<Eigen::Index>(r);
    try {
      for (std::size_t c = first; c < last; ++c) {
        values(ri, static_cast<Eigen::Index>(c - first)) = csv::parse_double(row[c], doc.header[c]);
      }
      if (has_label) {
        const std::string& l = row.back();
        if (l != "0" && l != "1") fail(ErrorKind::ParseError, "label must be 0 or 1");
        (*labels)(ri) = l == "1" ? 1 : 0;
      }
    } catch (const Error& e) {
      throw e.annotated(std::string(source) + ":" + std::to_string(doc.line_numbers[r]));
    }
  }
  return FeatureTable(std::move(ids), std::move(names), std::move(values), std::move(labels));
}

void FeatureTable::write_csv(const std::filesystem::path& path) const {
  csv::write_text_file(path, to_csv());
}

FeatureTable FeatureTable::read_csv(const std::filesystem::path& path) {
  return from_csv(csv::read_text_file(path), path.string());
}

}  // namespace schoolconn
