#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "brc/domain.hpp"
#include "brc/error.hpp"

namespace brc {
namespace {

SurveyLoadResult read(const std::string& text) {
  std::istringstream in(text);
  return read_survey_csv(in, SurveySchema{});
}

const char* kHeader = "participant_id,wave,repeat,age,sex,household_size,contacts\n";

TEST(SurveyIngestion, DropsRowsWithMissingSex) {
  const auto r = read(std::string(kHeader) + "a,1,0,30,M,2,4\nb,1,0,41,,1,3\nc,1,0,52,F,3,0\n");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_EQ(r.records[1].participant_id, "c");
}

TEST(SurveyIngestion, HeaderOnlyGivesNoRecords) { EXPECT_TRUE(read(kHeader).records.empty()); }

TEST(SurveyIngestion, AgeAboveRangeIsAnError) {
  try {
    read(std::string(kHeader) + "a,1,0,90,M,2,4\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("age out of range 0-84"), std::string::npos);
  }
}

TEST(SurveyIngestion, CapsContacts) {
  const auto r = read(std::string(kHeader) + "a,1,0,30,M,2,45\n");
  EXPECT_EQ(r.records[0].contacts, kDefaultContactCap);
}

TEST(SurveyIngestion, ImputesChildBand) {
  const auto r = read(std::string(kHeader) + "a,1,0,5-9,F,4,3\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_GE(r.records[0].age, 5);
  EXPECT_LE(r.records[0].age, 9);
}

TEST(ChildAge, DegenerateBand) {
  auto rng = make_rng(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(impute_child_age(AgeBand(10, 10), rng), 10);
  EXPECT_THROW(impute_child_age(AgeBand(25, 34), rng), DataError);
}

TEST(Truncation, Boundaries) {
  EXPECT_EQ(truncate_contacts(30), 30);
  EXPECT_EQ(truncate_contacts(0), 0);
  EXPECT_EQ(truncate_contacts(31), 30);
}

TEST(Bands, Aggregation) {
  const auto bands = CoarseBandSet::contact_default();
  std::vector<double> ones(kAgeCount, 1.0), ramp(kAgeCount);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const auto a = aggregate_to_bands(ones, bands);
  EXPECT_EQ(a[*bands.index_of(AgeBand(0, 4))], 5.0);
  const auto b = aggregate_to_bands(ramp, bands);
  EXPECT_EQ(b[*bands.index_of(AgeBand(25, 34))], 295.0);
  EXPECT_EQ(std::accumulate(b.begin(), b.end(), 0.0), std::accumulate(ramp.begin(), ramp.end(), 0.0));
}

TEST(Bands, ParseLabels) {
  EXPECT_EQ(AgeBand::parse("25-34"), AgeBand(25, 34));
  EXPECT_EQ(AgeBand::parse("25–34"), AgeBand(25, 34));
  EXPECT_THROW(AgeBand::parse("x"), DataError);
}

TEST(Design, TreatmentCodingDropsReference) {
  std::vector<SurveyRecord> records(2);
  records[0].sex = "M";
  records[1].sex = "F";
  FeatureSpec spec;
  FeatureBlock u;
  u.name = "u";
  u.features = {CategoricalFeature("sex", observed_levels(records, "sex"))};
  spec.blocks = {u};
  const auto d = build_design(records, spec);
  ASSERT_EQ(d.column_names, (std::vector<std::string>{"sex:M"}));
  EXPECT_EQ(d.rows(0, 0), 1.0);
  EXPECT_EQ(d.rows(1, 0), 0.0);
}

TEST(Design, FullCodingKeepsEveryLevel) {
  std::vector<SurveyRecord> records(3);
  records[0].household_size = "1";
  records[1].household_size = "2";
  records[2].household_size = "5+";
  FeatureSpec spec;
  FeatureBlock w;
  w.name = "w";
  w.features = {CategoricalFeature("household_size", observed_levels(records, "household_size"), Coding::full)};
  spec.blocks = {w};
  const auto d = build_design(records, spec);
  EXPECT_EQ(d.block("w").cols(), 3);
  EXPECT_EQ(d.block("w").rowwise().sum(), Eigen::VectorXd::Ones(3));
}

TEST(Population, DefaultCoversAllAges) {
  const PopulationTable p;
  EXPECT_EQ(p.ages(), static_cast<std::size_t>(kAgeCount));
  for (int a = 0; a < kAgeCount; ++a) EXPECT_GT(p.count(0, a) + p.count(1, a), 0.0);
}

TEST(Survey, WriteThenReadRoundTrips) {
  std::vector<SurveyRecord> records(1);
  records[0].participant_id = "P1";
  records[0].wave = 2;
  records[0].repeat = 1;
  records[0].age = 40;
  records[0].sex = "F";
  records[0].household_size = "3";
  records[0].covariates["region"] = "north";
  records[0].contacts = 7;
  std::stringstream s;
  write_survey_csv(s, records, {"region"}, CoarseBandSet::contact_default(), false);
  const auto back = read_survey_csv(s, SurveySchema{});
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0].covariates.at("region"), "north");
  EXPECT_EQ(back.records[0].contacts, 7);
  EXPECT_EQ(back.records[0].repeat, 1);
}

}  // namespace
}  // namespace brc
