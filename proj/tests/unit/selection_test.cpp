#include <gtest/gtest.h>

#include <sstream>

#include "brc/selection.hpp"

namespace brc {
namespace {

TEST(Thresholds, StageOneInterval) {
  const SelectionThresholds t;
  EXPECT_TRUE(stage1_selected(0.06, t));
  EXPECT_TRUE(stage1_selected(-0.06, t));
  EXPECT_FALSE(stage1_selected(-0.03, t));
  EXPECT_FALSE(stage1_selected(0.0487, t));
}

TEST(Thresholds, StageTwoIsOneSided) {
  const SelectionThresholds t;
  EXPECT_TRUE(stage2_selected(-0.06, t));
  EXPECT_FALSE(stage2_selected(-0.05, t));
  EXPECT_FALSE(stage2_selected(0.3, t));
}

SelectionResult with(std::vector<std::pair<std::string, bool>> features) {
  SelectionResult r;
  for (auto& [name, selected] : features) r.features.push_back({name, 0.0, 0.0, 0.0, selected});
  return r;
}

TEST(Union, Basics) {
  const std::vector<SelectionResult> ab = {with({{"A", true}, {"B", true}, {"C", false}}),
                                           with({{"B", true}, {"C", true}})};
  EXPECT_EQ(union_across_waves(ab), (std::vector<std::string>{"A", "B", "C"}));
  const std::vector<SelectionResult> ex = {with({}), with({{"X", true}})};
  EXPECT_EQ(union_across_waves(ex), (std::vector<std::string>{"X"}));
}

TEST(SelectionResult, CsvLayout) {
  auto r = with({{"region:south", true}});
  r.features[0].median = -0.25;
  std::ostringstream os;
  r.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "feature,median,lower50,upper50,selected");
  EXPECT_NE(os.str().find("region:south"), std::string::npos);
  EXPECT_EQ(r.selected_names(), (std::vector<std::string>{"region:south"}));
}

}  // namespace
}  // namespace brc
