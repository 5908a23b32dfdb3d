#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "adbcr/errors.hpp"
#include "adbcr/search.hpp"
#include "test_support.hpp"

namespace adbcr {
namespace {

SearchSpace tiny_space() {
  SearchSpace s;
  s.shared_layers = {{6}, {4}};
  s.head_layers = {{4}};
  s.dropout = {0.1};
  s.weight_decay = {0.001};
  s.batch_size = {60};
  s.learning_rate_min = 1e-3;
  s.learning_rate_max = 1e-2;
  s.k = {1};
  s.draws = 2;
  s.max_epochs = 4;
  s.patience = 2;
  return s;
}

TEST(SearchSpace, ParsesKeyValueText) {
  const SearchSpace s = parse_search_space(
      "# comment\n"
      "shared_layers = 20,20; 10\n"
      "head_layers = 10\n"
      "dropout = 0.1; 0.2\n"
      "learning_rate = 1e-4, 1e-3\n"
      "draws = 3\n");
  EXPECT_EQ(s.shared_layers, (std::vector<std::vector<std::size_t>>{{20, 20}, {10}}));
  EXPECT_EQ(s.head_layers, (std::vector<std::vector<std::size_t>>{{10}}));
  EXPECT_EQ(s.dropout, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(s.learning_rate_min, 1e-4);
  EXPECT_EQ(s.learning_rate_max, 1e-3);
  EXPECT_EQ(s.run_count(), 6u);
  EXPECT_THROW(parse_search_space("bogus = 1\n"), ParseError);
  EXPECT_THROW(parse_search_space("draws = 0\n"), ConfigError);
}

TEST(Expand, DrawsAreDeterministicInRangeAndPairedAcrossModes) {
  const SearchSpace s = tiny_space();
  const auto a = expand(s, SearchModel::adbcr, 3);
  const auto t = expand(s, SearchModel::a_tarnet, 3);
  ASSERT_EQ(a.size(), 4u);
  ASSERT_EQ(t.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].index, i);
    EXPECT_GE(a[i].net.learning_rate, 1e-3);
    EXPECT_LE(a[i].net.learning_rate, 1e-2);
    EXPECT_EQ(a[i].net.learning_rate, t[i].net.learning_rate);
    EXPECT_EQ(a[i].net.seed, t[i].net.seed);
    EXPECT_EQ(t[i].net.mode, TrainMode::a_tarnet);
    EXPECT_EQ(a[i].net.max_epochs, 4);
  }
  EXPECT_EQ(a[0].net.shared_layers, (std::vector<std::size_t>{6}));
  EXPECT_EQ(a[2].net.shared_layers, (std::vector<std::size_t>{4}));
  EXPECT_EQ(expand(s, SearchModel::adbcr, 3)[1].fingerprint, a[1].fingerprint);
}

TEST(Search, SelectsTheMinimumAndIsIndependentOfJobCount) {
  const Dataset data = testing::small_generated(1, 200, 3);
  const SearchResult one = search(data, tiny_space(), SearchModel::adbcr, 5, 1);
  const SearchResult two = search(data, tiny_space(), SearchModel::adbcr, 5, 2);
  ASSERT_EQ(one.runs.size(), 4u);
  EXPECT_EQ(one.completed(), 4u);
  for (const auto& r : one.runs) EXPECT_LE(one.best_run().selection_value, r.selection_value);
  EXPECT_EQ(one.best, two.best);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(one.runs[i].selection_value, two.runs[i].selection_value);
    EXPECT_EQ(one.runs[i].result->best_model, two.runs[i].result->best_model);
  }
}

TEST(Search, EveryModelFamilyRuns) {
  const Dataset data = testing::small_generated(2, 200, 3);
  SearchSpace s = tiny_space();
  s.shared_layers = {{4}};
  s.draws = 1;
  for (auto m : {SearchModel::uadbcr, SearchModel::a_tarnet, SearchModel::danncr}) {
    const SearchResult r = search(data, s, m, 1);
    EXPECT_EQ(r.completed(), 1u) << to_string(m);
  }
  EXPECT_EQ(parse_search_model("danncr"), SearchModel::danncr);
  EXPECT_THROW(parse_search_model("cfr"), ConfigError);
}

TEST(Search, AllFailingRunsRaiseSearchError) {
  Dataset data = testing::small_generated(3, 200, 3);
  data.split.clear();  // training refuses data without a split
  EXPECT_THROW(search(data, tiny_space(), SearchModel::adbcr, 1), SearchError);
}

TEST(Search, RunTableHasOneRowPerRunPlusSummary) {
  const Dataset data = testing::small_generated(4, 200, 3);
  const SearchResult r = search(data, tiny_space(), SearchModel::a_tarnet, 2);
  std::istringstream in(run_table_csv(r));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 1u + 4u + 1u);
  EXPECT_EQ(lines[0].rfind("index,status,fingerprint", 0), 0u);
  EXPECT_EQ(lines.back().rfind("summary,best", 0), 0u);
}

TEST(SelectMin, SkipsNaNAndPrefersTheFirstTie) {
  SearchResult r;
  r.runs.resize(4);
  r.runs[0].failed = true;
  EXPECT_EQ(select_min(r, {std::nan(""), 2.0, 1.0, 1.0}), 2u);
  EXPECT_THROW(select_min(r, {std::nan(""), std::nan(""), std::nan(""), std::nan("")}), SearchError);
}

}  // namespace
}  // namespace adbcr
