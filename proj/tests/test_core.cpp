#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fairpath/dataset.hpp"
#include "fairpath/effects.hpp"

using namespace fairpath;

namespace {

SfmSpec salary_spec() {
  SfmSpec s;
  s.attribute = "sex";
  s.x0_label = "m";
  s.x1_label = "f";
  s.confounders = {"age"};
  s.mediators = {"edu"};
  s.outcome = "salary";
  return s;
}

Dataset parse(const std::string& text, const SfmSpec& spec) {
  std::istringstream in(text);
  return read_csv(in, spec, {});
}

// n rows alternating between groups; a numeric confounder and a categorical mediator.
Dataset balanced(std::size_t n) {
  std::string text = "sex,age,edu,salary\n";
  for (std::size_t i = 0; i < n; ++i) {
    text += (i % 2 ? "f," : "m,") + std::to_string(20 + i % 7) + "," + "abc"[i % 3] + "," +
            std::to_string(1.5 * static_cast<double>(i)) + "\n";
  }
  return parse(text, salary_spec());
}

}  // namespace

TEST_CASE("effect sets and names") {
  EffectSet s(0b101, 3);
  CHECK(s.contains(0));
  CHECK_FALSE(s.contains(1));
  CHECK(s.size() == 2);
  CHECK(s.label({"D", "I", "S"}) == "{D,S}");
  CHECK(EffectSet::empty(3).label({"D", "I", "S"}) == "{}");
  CHECK(EffectSet::full(3).mask() == 7u);
  CHECK(EffectSet::empty(2).with(1) == EffectSet(2, 2));
  CHECK(parse_effect("d") == EffectId::direct);
  CHECK(parse_effect("IE") == EffectId::indirect);
  CHECK(parse_effect("spurious") == EffectId::spurious);
  CHECK_THROWS(parse_effect("x"));
}

TEST_CASE("sfm spec json round trip and validation") {
  const auto spec = salary_spec();
  const auto back = parse_sfm_spec(sfm_spec_to_json(spec));
  CHECK(back.attribute == "sex");
  CHECK(back.x1_label == "f");
  CHECK(back.confounders == spec.confounders);
  CHECK(back.mediators == spec.mediators);
  CHECK(back.task == TaskKind::regression);

  auto bad = spec;
  bad.mediators = {"age"};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("more than one role"), std::invalid_argument);
  bad = spec;
  bad.x1_label = "m";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("load a four row csv") {
  const auto d = parse(
      "sex,age,edu,salary,unused\n"
      "m,30,hs,50,x\n"
      "f,41,ba,62.5,y\n"
      "\"f\",29,\"ms, phd\",70,z\n"
      "m,55,hs,48,w\n",
      salary_spec());
  CHECK(d.n() == 4);
  CHECK(d.columns().size() == 4);
  CHECK(d.attribute_codes() == std::vector<int>{0, 1, 1, 0});
  CHECK(d.column("age").kind == ColumnKind::numeric);
  CHECK(d.column("edu").kind == ColumnKind::categorical);
  CHECK(d.column("edu").labels[2] == "ms, phd");
  CHECK(d.column("salary").numbers[1] == 62.5);
  CHECK(d.group_count(1) == 2);
}

TEST_CASE("csv errors") {
  CHECK_THROWS_WITH(parse("sex,age,edu,salary\nm,1,a,1\nf,2,b,2\nu,3,c,3\n", salary_spec()),
                    doctest::Contains("attribute not binary"));
  CHECK_THROWS_WITH(parse("sex,age,salary\nm,1,1\n", salary_spec()), doctest::Contains("missing column"));
  CHECK_THROWS_WITH(parse("", salary_spec()), doctest::Contains("empty file"));
}

TEST_CASE("rows with a missing value are dropped and counted") {
  std::string text = "sex,age,edu,salary\n";
  for (int i = 0; i < 100; ++i)
    text += std::string(i % 2 ? "f" : "m") + ",30," + (i == 17 ? "" : "hs") + ",1\n";
  const auto d = parse(text, salary_spec());
  CHECK(d.n() == 99);
  CHECK(d.dropped_rows() == 1);

  const auto na = parse("sex,age,edu,salary\nm,NA,a,1\nf,2,b,NaN\nf,3,c,3\nm,4,d,4\n", salary_spec());
  CHECK(na.n() == 2);
  CHECK(na.dropped_rows() == 2);
}

TEST_CASE("csv round trip keeps every value") {
  auto d = balanced(50);
  std::ostringstream out;
  write_csv(d, out);
  const auto back = parse(out.str(), salary_spec());
  REQUIRE(back.n() == d.n());
  for (const auto& c : d.columns()) {
    const auto& b = back.column(c.name);
    CHECK(b.kind == c.kind);
    CHECK(b.numbers == c.numbers);
    CHECK(b.labels == c.labels);
  }
}

TEST_CASE("stratified split") {
  const auto d = balanced(100);
  const auto plan = split(d, 0.7, 1);
  CHECK(plan.train.size() == 70);
  CHECK(plan.eval.size() == 30);
  auto count = [&](const std::vector<std::size_t>& idx, int g) {
    std::size_t k = 0;
    for (auto i : idx) k += d.attribute_codes()[i] == g;
    return k;
  };
  CHECK(count(plan.train, 0) == 35);
  CHECK(count(plan.train, 1) == 35);
  CHECK(count(plan.eval, 0) == 15);
  CHECK(count(plan.eval, 1) == 15);

  std::set<std::size_t> all(plan.train.begin(), plan.train.end());
  all.insert(plan.eval.begin(), plan.eval.end());
  CHECK(all.size() == 100);

  const auto again = split(d, 0.7, 1);
  CHECK(again.train == plan.train);
  CHECK(again.eval == plan.eval);
  CHECK(split(d, 0.7, 2).train != plan.train);
}

TEST_CASE("split rejects a group too small for both folds") {
  std::string text = "sex,age,edu,salary\n";
  for (int i = 0; i < 25; ++i) text += std::string(i < 12 ? "f" : "m") + ",1,a,1\n";
  CHECK_THROWS_AS(split(parse(text, salary_spec()), 0.5, 1), std::invalid_argument);
}

TEST_CASE("split keeps group proportions within one row") {
  std::string text = "sex,age,edu,salary\n";
  for (int i = 0; i < 157; ++i) text += std::string(i % 3 == 0 ? "f" : "m") + ",1,a,1\n";
  const auto d = parse(text, salary_spec());
  for (double frac : {0.3, 0.5, 0.7, 0.8}) {
    const auto plan = split(d, frac, 9);
    for (int g = 0; g < 2; ++g) {
      double in_train = 0;
      for (auto i : plan.train) in_train += d.attribute_codes()[i] == g;
      const double expected = frac * static_cast<double>(d.group_count(g));
      CHECK(std::abs(in_train - expected) <= 1.0);
    }
  }
}

TEST_CASE("bootstrap resample") {
  std::vector<Column> cols(4);
  cols[0] = {"sex", ColumnKind::categorical, {}, {"f"}};
  cols[1] = {"age", ColumnKind::numeric, {3.0}, {}};
  cols[2] = {"edu", ColumnKind::categorical, {}, {"a"}};
  cols[3] = {"salary", ColumnKind::numeric, {7.0}, {}};
  const Dataset one(cols, salary_spec(), {});
  const auto r1 = bootstrap_resample(one, 5);
  CHECK(r1.n() == 1);
  CHECK(r1.column("salary").numbers[0] == 7);

  const auto d = balanced(1000);
  const auto a = bootstrap_resample(d, 11);
  const auto b = bootstrap_resample(d, 11);
  CHECK(a.column("salary").numbers == b.column("salary").numbers);

  // Salary is 1.5 * row index, so it identifies the source row.
  std::set<double> distinct(a.column("salary").numbers.begin(), a.column("salary").numbers.end());
  const double frac = static_cast<double>(distinct.size()) / 1000.0;
  CHECK(std::abs(frac - (1.0 - std::exp(-1.0))) < 0.05);
}

TEST_CASE("encoding arithmetic") {
  // Numeric confounder: train values 8 and 12 (mean 10, population sd 2).
  std::string text = "sex,age,edu,salary\n";
  for (int i = 0; i < 40; ++i) text += std::string(i % 2 ? "f," : "m,") + (i % 4 < 2 ? "8" : "12") + ",b,1\n";
  text += "m,14,a,1\nf,14,c,1\n";
  auto d = parse(text, salary_spec());
  SplitPlan plan;
  for (std::size_t i = 0; i < 40; ++i) plan.train.push_back(i);
  plan.eval = {40, 41};
  const auto view = encode(d, plan);
  CHECK(view.z_width == 1);
  CHECK(view.inputs(1, 40) == doctest::Approx(2.0).epsilon(1e-12));

  // Categorical mediator seen only as "b" on train: one-hot width 1, unseen -> zeros + warning.
  CHECK(view.w_width == 1);
  CHECK(view.inputs(2, 0) == 1.0);
  CHECK(view.inputs(2, 40) == 0.0);
  CHECK_FALSE(view.warnings.empty());
}

TEST_CASE("one-hot encoding and constant columns") {
  const auto d = parse(
      "sex,age,edu,salary\n"
      "m,5,a,1\nf,5,b,2\nm,5,c,3\nf,5,b,4\n",
      salary_spec());
  SplitPlan plan;
  plan.train = {0, 1, 2, 3};
  plan.eval = {0};
  const auto view = encode(d, plan);
  CHECK(view.w_width == 3);
  // Row 1 has edu = b -> (0, 1, 0); rows are x, z, w...
  CHECK(view.inputs(2, 1) == 0.0);
  CHECK(view.inputs(3, 1) == 1.0);
  CHECK(view.inputs(4, 1) == 0.0);
  // Constant age -> zeros and a warning.
  for (Eigen::Index c = 0; c < view.inputs.cols(); ++c) CHECK(view.inputs(1, c) == 0.0);
  bool warned = false;
  for (const auto& w : view.warnings) warned = warned || w.find("zero variance") != std::string::npos;
  CHECK(warned);
  CHECK(view.x()(1) == 1.0);
  CHECK(view.flipped_inputs()(0, 1) == 0.0);
}

TEST_CASE("encoding is deterministic") {
  const auto d = balanced(200);
  const auto plan = split(d, 0.7, 4);
  const auto a = encode(d, plan);
  const auto b = encode(d, plan);
  CHECK(a.inputs == b.inputs);
  CHECK(a.y == b.y);
  // Statistics come from the training fold only.
  double mean = 0;
  for (auto i : plan.train) mean += d.column("age").numbers[i];
  mean /= static_cast<double>(plan.train.size());
  CHECK(a.stats.confounders[0].mean == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("binary outcome encoding") {
  auto spec = salary_spec();
  spec.task = TaskKind::binary_classification;
  const auto d = parse("sex,age,edu,salary\nm,1,a,no\nf,2,b,yes\nm,3,a,yes\nf,4,b,no\n", spec);
  SplitPlan plan;
  plan.train = {0, 1, 2, 3};
  plan.eval = {0};
  const auto view = encode(d, plan);
  CHECK(view.stats.outcome_positive_label == "yes");
  CHECK(view.y(1) == 1.0);
  CHECK(view.y(3) == 0.0);
}
