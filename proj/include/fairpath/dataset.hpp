#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fairpath {

enum class TaskKind { regression, binary_classification };

const char* task_name(TaskKind task);
TaskKind parse_task(std::string_view name);

/// Maps dataset columns onto the standard fairness model roles X, Z, W, Y.
struct SfmSpec {
  std::string attribute;
  std::string x0_label;
  std::string x1_label;
  std::vector<std::string> confounders;
  std::vector<std::string> mediators;
  std::string outcome;
  TaskKind task = TaskKind::regression;

  /// Names used by the spec, attribute first, then Z, W and Y.
  std::vector<std::string> columns() const;

  /// Checks the structural invariants (distinct names, disjoint roles,
  /// distinct labels). Throws std::invalid_argument.
  void validate() const;
};

SfmSpec parse_sfm_spec(std::string_view json_text);
std::string sfm_spec_to_json(const SfmSpec& spec);
SfmSpec load_sfm_spec(const std::filesystem::path& path);
void save_sfm_spec(const SfmSpec& spec, const std::filesystem::path& path);

enum class ColumnKind { numeric, categorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> numbers;
  std::vector<std::string> labels;

  std::size_t size() const {
    return kind == ColumnKind::numeric ? numbers.size() : labels.size();
  }
};

struct Provenance {
  enum class Kind { file, synthetic } kind = Kind::synthetic;
  std::string path;
  std::uint64_t seed = 0;
};

/// Immutable table bound to a validated SfmSpec. Holds only the SFM columns.
class Dataset {
 public:
  Dataset(std::vector<Column> columns, SfmSpec spec, Provenance provenance,
          std::size_t dropped_rows = 0);

  std::size_t n() const { return n_; }
  const SfmSpec& spec() const { return spec_; }
  const Provenance& provenance() const { return provenance_; }
  std::size_t dropped_rows() const { return dropped_rows_; }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::string_view name) const;

  /// 0 for x0_label, 1 for x1_label.
  const std::vector<int>& attribute_codes() const { return codes_; }
  std::size_t group_count(int code) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;

 private:
  std::vector<Column> columns_;
  SfmSpec spec_;
  Provenance provenance_;
  std::size_t dropped_rows_ = 0;
  std::size_t n_ = 0;
  std::vector<int> codes_;
};

/// RFC-4180 reader. Rows with a missing value ("", "NA", "NaN") in any SFM
/// column are dropped and counted.
Dataset read_csv(std::istream& in, const SfmSpec& spec, Provenance provenance);
Dataset load_csv(const std::filesystem::path& path, const SfmSpec& spec);
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

struct SplitPlan {
  double train_fraction = 0.7;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
  std::uint64_t seed = 0;
};

/// Stratified by attribute group; deterministic per seed. Every group needs at
/// least 20 rows so that both folds keep 10 rows of each group.
SplitPlan split(const Dataset& data, double fraction, std::uint64_t seed);

/// n draws with replacement.
Dataset bootstrap_resample(const Dataset& data, std::uint64_t seed);

struct ColumnEncoding {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  double mean = 0.0;
  double scale = 1.0;
  std::vector<std::string> categories;  // sorted; one output column each

  std::size_t width() const { return kind == ColumnKind::numeric ? 1 : categories.size(); }
};

struct EncodingStats {
  std::vector<ColumnEncoding> confounders;
  std::vector<ColumnEncoding> mediators;
  std::string outcome_positive_label;  // classification with categorical Y
};

/// Numeric view of a dataset. `inputs` is the model design with one column
/// per row: row 0 holds x, then the encoded Z block, then the W block.
struct EncodedView {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd y;
  std::size_t z_width = 0;
  std::size_t w_width = 0;
  TaskKind task = TaskKind::regression;
  EncodingStats stats;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t input_width() const { return static_cast<std::size_t>(inputs.rows()); }
  auto x() const { return inputs.row(0); }
  Eigen::MatrixXd z() const;
  Eigen::MatrixXd w() const;
  std::size_t group_count(int code) const;

  /// Same design with the attribute row replaced by 1 - x.
  Eigen::MatrixXd flipped_inputs() const;

  EncodedView rows(std::span<const std::size_t> indices) const;
};

/// Encodes every row of `data`, with all statistics frozen from the training
/// fold of `plan`. Categorical columns are one-hot encoded; numeric Z/W
/// columns are z-scored.
EncodedView encode(const Dataset& data, const SplitPlan& plan);

}  // namespace fairpath
