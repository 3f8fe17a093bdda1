#include "fairpath/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fairpath/random.hpp"
#include "json.hpp"

namespace fairpath {

namespace {

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan";
}

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

// Splits one RFC-4180 record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

const char* task_name(TaskKind task) {
  return task == TaskKind::regression ? "regression" : "binary-classification";
}

TaskKind parse_task(std::string_view name) {
  if (name == "regression") return TaskKind::regression;
  if (name == "binary-classification" || name == "classification") return TaskKind::binary_classification;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

std::vector<std::string> SfmSpec::columns() const {
  std::vector<std::string> out{attribute};
  out.insert(out.end(), confounders.begin(), confounders.end());
  out.insert(out.end(), mediators.begin(), mediators.end());
  out.push_back(outcome);
  return out;
}

void SfmSpec::validate() const {
  if (attribute.empty()) throw std::invalid_argument("sfm: attribute name is empty");
  if (outcome.empty()) throw std::invalid_argument("sfm: outcome name is empty");
  if (x0_label == x1_label) throw std::invalid_argument("sfm: x0 and x1 labels must differ");
  std::set<std::string> seen;
  for (const auto& name : columns()) {
    if (name.empty()) throw std::invalid_argument("sfm: empty column name");
    if (!seen.insert(name).second)
      throw std::invalid_argument("sfm: column '" + name + "' assigned to more than one role");
  }
}

SfmSpec parse_sfm_spec(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  SfmSpec spec;
  try {
    spec.attribute = doc.at("attribute").get<std::string>();
    spec.x0_label = doc.at("x0").get<std::string>();
    spec.x1_label = doc.at("x1").get<std::string>();
    spec.confounders = doc.value("confounders", std::vector<std::string>{});
    spec.mediators = doc.value("mediators", std::vector<std::string>{});
    spec.outcome = doc.at("outcome").get<std::string>();
    spec.task = parse_task(doc.value("task", std::string("regression")));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("sfm: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string sfm_spec_to_json(const SfmSpec& spec) {
  nlohmann::ordered_json doc;
  doc["attribute"] = spec.attribute;
  doc["x0"] = spec.x0_label;
  doc["x1"] = spec.x1_label;
  doc["confounders"] = spec.confounders;
  doc["mediators"] = spec.mediators;
  doc["outcome"] = spec.outcome;
  doc["task"] = task_name(spec.task);
  return doc.dump(2);
}

SfmSpec load_sfm_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sfm spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sfm_spec(ss.str());
}

void save_sfm_spec(const SfmSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << sfm_spec_to_json(spec) << "\n";
}

Dataset::Dataset(std::vector<Column> columns, SfmSpec spec, Provenance provenance,
                 std::size_t dropped_rows)
    : columns_(std::move(columns)),
      spec_(std::move(spec)),
      provenance_(std::move(provenance)),
      dropped_rows_(dropped_rows) {
  spec_.validate();
  if (columns_.empty()) throw std::invalid_argument("dataset has no columns");
  n_ = columns_.front().size();
  if (n_ == 0) throw std::invalid_argument("dataset has no rows");
  for (const auto& c : columns_)
    if (c.size() != n_) throw std::invalid_argument("column '" + c.name + "' has mismatched length");
  for (const auto& name : spec_.columns()) (void)column(name);

  const Column& attr = column(spec_.attribute);
  if (attr.kind != ColumnKind::categorical)
    throw std::invalid_argument("attribute column must be categorical");
  codes_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto& label = attr.labels[i];
    if (label == spec_.x0_label) codes_[i] = 0;
    else if (label == spec_.x1_label) codes_[i] = 1;
    else throw std::invalid_argument("attribute not binary: unexpected label '" + label + "'");
  }
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw std::invalid_argument("missing column '" + std::string(name) + "'");
}

std::size_t Dataset::group_count(int code) const {
  return static_cast<std::size_t>(std::count(codes_.begin(), codes_.end(), code));
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column copy{c.name, c.kind, {}, {}};
    if (c.kind == ColumnKind::numeric) {
      copy.numbers.reserve(rows.size());
      for (auto r : rows) copy.numbers.push_back(c.numbers.at(r));
    } else {
      copy.labels.reserve(rows.size());
      for (auto r : rows) copy.labels.push_back(c.labels.at(r));
    }
    out.push_back(std::move(copy));
  }
  return Dataset(std::move(out), spec_, provenance_, dropped_rows_);
}

Dataset read_csv(std::istream& in, const SfmSpec& spec, Provenance provenance) {
  spec.validate();
  std::vector<std::string> header;
  if (!read_record(in, header) || (header.size() == 1 && header[0].empty()))
    throw std::runtime_error("csv: empty file");

  const auto wanted = spec.columns();
  std::vector<std::size_t> position;
  for (const auto& name : wanted) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("missing column '" + name + "'");
    position.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<std::vector<std::string>> cells(wanted.size());
  std::size_t dropped = 0;
  std::vector<std::string> record;
  std::size_t line = 1;
  while (read_record(in, record)) {
    ++line;
    if (record.size() == 1 && record[0].empty()) continue;  // blank line
    if (record.size() != header.size())
      throw std::runtime_error("csv: line " + std::to_string(line) + " has " +
                               std::to_string(record.size()) + " fields, expected " +
                               std::to_string(header.size()));
    bool missing = false;
    for (auto p : position) missing = missing || is_missing(record[p]);
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t j = 0; j < position.size(); ++j) cells[j].push_back(record[position[j]]);
  }
  if (cells.front().empty()) throw std::runtime_error("csv: no complete rows");

  std::vector<Column> columns;
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    Column col{wanted[j], ColumnKind::numeric, {}, {}};
    bool numeric = wanted[j] != spec.attribute;
    std::vector<double> values;
    if (numeric) {
      values.reserve(cells[j].size());
      for (const auto& s : cells[j]) {
        double v;
        if (!parse_double(s, v)) {
          numeric = false;
          break;
        }
        values.push_back(v);
      }
    }
    if (numeric) {
      col.numbers = std::move(values);
    } else {
      col.kind = ColumnKind::categorical;
      col.labels = std::move(cells[j]);
    }
    columns.push_back(std::move(col));
  }

  std::set<std::string> labels(columns.front().labels.begin(), columns.front().labels.end());
  if (labels.size() != 2 || !labels.count(spec.x0_label) || !labels.count(spec.x1_label))
    throw std::invalid_argument("attribute not binary: column '" + spec.attribute +
                                "' must contain exactly the labels '" + spec.x0_label +
                                "' and '" + spec.x1_label + "'");
  return Dataset(std::move(columns), spec, std::move(provenance), dropped);
}

Dataset load_csv(const std::filesystem::path& path, const SfmSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in, spec, Provenance{Provenance::Kind::file, path.string(), 0});
}

void write_csv(const Dataset& data, std::ostream& out) {
  const auto& cols = data.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << quote_csv(cols[j].name);
  out << "\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out << ",";
      if (cols[j].kind == ColumnKind::numeric) out << format_double(cols[j].numbers[i]);
      else out << quote_csv(cols[j].labels[i]);
    }
    out << "\n";
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(data, out);
}

SplitPlan split(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  SplitPlan plan;
  plan.train_fraction = fraction;
  plan.seed = seed;
  Rng rng(seed);
  for (int g = 0; g < 2; ++g) {
    std::vector<std::size_t> rows;
    const auto& codes = data.attribute_codes();
    for (std::size_t i = 0; i < codes.size(); ++i)
      if (codes[i] == g) rows.push_back(i);
    if (rows.size() < 20)
      throw std::invalid_argument("split: attribute group " + std::to_string(g) + " has only " +
                                  std::to_string(rows.size()) + " rows (need at least 20)");
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 10, rows.size() - 10);
    plan.train.insert(plan.train.end(), rows.begin(), rows.begin() + static_cast<long>(n_train));
    plan.eval.insert(plan.eval.end(), rows.begin() + static_cast<long>(n_train), rows.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.eval.begin(), plan.eval.end());
  return plan;
}

Dataset bootstrap_resample(const Dataset& data, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.n() - 1);
  std::vector<std::size_t> rows(data.n());
  for (auto& r : rows) r = pick(rng);
  return data.select_rows(rows);
}

namespace {

ColumnEncoding fit_encoding(const Column& col, std::span<const std::size_t> train,
                            std::vector<std::string>& warnings) {
  ColumnEncoding enc;
  enc.name = col.name;
  enc.kind = col.kind;
  if (col.kind == ColumnKind::numeric) {
    double sum = 0.0;
    for (auto r : train) sum += col.numbers[r];
    enc.mean = sum / static_cast<double>(train.size());
    double ss = 0.0;
    for (auto r : train) ss += (col.numbers[r] - enc.mean) * (col.numbers[r] - enc.mean);
    const double sd = std::sqrt(ss / static_cast<double>(train.size()));
    if (sd > 1e-12 * std::max(1.0, std::abs(enc.mean))) {
      enc.scale = sd;
    } else {
      enc.scale = 1.0;
      warnings.push_back("column '" + col.name + "' has zero variance on the training fold");
    }
  } else {
    std::set<std::string> cats;
    for (auto r : train) cats.insert(col.labels[r]);
    enc.categories.assign(cats.begin(), cats.end());
  }
  return enc;
}

void apply_encoding(const ColumnEncoding& enc, const Column& col, Eigen::MatrixXd& inputs,
                    Eigen::Index first_row, std::vector<std::string>& warnings) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (enc.kind == ColumnKind::numeric) {
    for (std::size_t i = 0; i < n; ++i)
      inputs(first_row, static_cast<Eigen::Index>(i)) = (col.numbers[i] - enc.mean) / enc.scale;
    return;
  }
  std::size_t unseen = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::lower_bound(enc.categories.begin(), enc.categories.end(), col.labels[i]);
    if (it == enc.categories.end() || *it != col.labels[i]) {
      ++unseen;
      continue;
    }
    inputs(first_row + (it - enc.categories.begin()), static_cast<Eigen::Index>(i)) = 1.0;
  }
  if (unseen > 0)
    warnings.push_back("column '" + col.name + "': " + std::to_string(unseen) +
                       " rows with categories unseen in training, encoded as all zeros");
}

}  // namespace

EncodedView encode(const Dataset& data, const SplitPlan& plan) {
  if (plan.train.empty() || plan.eval.empty()) throw std::invalid_argument("encode: empty fold");
  for (auto r : plan.train)
    if (r >= data.n()) throw std::invalid_argument("encode: split does not match dataset");
  for (auto r : plan.eval)
    if (r >= data.n()) throw std::invalid_argument("encode: split does not match dataset");

  const auto& spec = data.spec();
  EncodedView view;
  view.task = spec.task;
  for (const auto& name : spec.confounders)
    view.stats.confounders.push_back(fit_encoding(data.column(name), plan.train, view.warnings));
  for (const auto& name : spec.mediators)
    view.stats.mediators.push_back(fit_encoding(data.column(name), plan.train, view.warnings));
  for (const auto& e : view.stats.confounders) view.z_width += e.width();
  for (const auto& e : view.stats.mediators) view.w_width += e.width();

  const auto n = static_cast<Eigen::Index>(data.n());
  view.inputs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(1 + view.z_width + view.w_width), n);
  const auto& codes = data.attribute_codes();
  for (Eigen::Index i = 0; i < n; ++i) view.inputs(0, i) = codes[static_cast<std::size_t>(i)];
  Eigen::Index row = 1;
  for (const auto& e : view.stats.confounders) {
    apply_encoding(e, data.column(e.name), view.inputs, row, view.warnings);
    row += static_cast<Eigen::Index>(e.width());
  }
  for (const auto& e : view.stats.mediators) {
    apply_encoding(e, data.column(e.name), view.inputs, row, view.warnings);
    row += static_cast<Eigen::Index>(e.width());
  }

  const Column& y = data.column(spec.outcome);
  view.y.resize(n);
  if (spec.task == TaskKind::regression) {
    if (y.kind != ColumnKind::numeric)
      throw std::invalid_argument("outcome '" + y.name + "' must be numeric for regression");
    for (Eigen::Index i = 0; i < n; ++i) view.y(i) = y.numbers[static_cast<std::size_t>(i)];
  } else if (y.kind == ColumnKind::numeric) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = y.numbers[static_cast<std::size_t>(i)];
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("binary outcome '" + y.name + "' must be coded 0/1");
      view.y(i) = v;
    }
    view.stats.outcome_positive_label = "1";
  } else {
    std::set<std::string> labels(y.labels.begin(), y.labels.end());
    if (labels.size() != 2)
      throw std::invalid_argument("binary outcome '" + y.name + "' must have exactly two labels");
    view.stats.outcome_positive_label = *labels.rbegin();
    for (Eigen::Index i = 0; i < n; ++i)
      view.y(i) = y.labels[static_cast<std::size_t>(i)] == view.stats.outcome_positive_label ? 1.0 : 0.0;
  }
  return view;
}

Eigen::MatrixXd EncodedView::z() const {
  return inputs.middleRows(1, static_cast<Eigen::Index>(z_width));
}

Eigen::MatrixXd EncodedView::w() const {
  return inputs.middleRows(static_cast<Eigen::Index>(1 + z_width), static_cast<Eigen::Index>(w_width));
}

std::size_t EncodedView::group_count(int code) const {
  return static_cast<std::size_t>((inputs.row(0).array() == static_cast<double>(code)).count());
}

Eigen::MatrixXd EncodedView::flipped_inputs() const {
  Eigen::MatrixXd out = inputs;
  out.row(0) = (1.0 - inputs.row(0).array()).matrix();
  return out;
}

EncodedView EncodedView::rows(std::span<const std::size_t> indices) const {
  EncodedView out;
  out.z_width = z_width;
  out.w_width = w_width;
  out.task = task;
  out.stats = stats;
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = static_cast<Eigen::Index>(indices[k]);
    if (src >= inputs.cols()) throw std::out_of_range("EncodedView::rows index out of range");
    out.inputs.col(static_cast<Eigen::Index>(k)) = inputs.col(src);
    out.y(static_cast<Eigen::Index>(k)) = y(src);
  }
  return out;
}

}  // namespace fairpath
