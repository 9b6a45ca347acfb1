#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "brc/config.hpp"
#include "brc/error.hpp"

namespace brc {
namespace {

TEST(FlatConfig, ParsesCommentsAndBlanks) {
  const auto c = FlatConfig::parse("# header\n\nseed = 7\nmodel.preset = gam\n  name=  a b  \n");
  EXPECT_EQ(c.get_int("seed", 0), 7);
  EXPECT_EQ(c.require("model.preset"), "gam");
  EXPECT_EQ(c.require("name"), "a b");
  EXPECT_FALSE(c.has("missing"));
  EXPECT_EQ(c.get_double("missing", 2.5), 2.5);
}

TEST(FlatConfig, DuplicateKeyIsAnError) { EXPECT_THROW(FlatConfig::parse("a = 1\na = 2\n"), ConfigError); }

TEST(FlatConfig, RejectUnknownHonoursPrefixes) {
  const auto c = FlatConfig::parse("sampler.chains = 2\nseed = 1\n");
  EXPECT_NO_THROW(c.reject_unknown({"sampler.", "seed"}));
  EXPECT_THROW(c.reject_unknown({"seed"}), ConfigError);
}

TEST(FlatConfig, KeysWithPrefixAreSorted) {
  const auto c = FlatConfig::parse("b.z = 1\nb.a = 2\nc = 3\n");
  EXPECT_EQ(c.keys_with_prefix("b."), (std::vector<std::string>{"b.a", "b.z"}));
}

TEST(FlatConfig, RoundTripsThroughText) {
  FlatConfig c;
  c.set("x", 0.1);
  c.set("n", 12LL);
  c.set("s", "hello");
  const auto back = FlatConfig::parse(c.to_string());
  EXPECT_EQ(back.entries(), c.entries());
  EXPECT_EQ(back.get_double("x", 0.0), 0.1);
}

TEST(FlatConfig, BadNumbersAreConfigErrors) {
  const auto c = FlatConfig::parse("x = abc\nflag = maybe\n");
  EXPECT_THROW(c.get_double("x", 0.0), ConfigError);
  EXPECT_THROW(c.get_bool("flag", false), ConfigError);
  EXPECT_THROW(c.require("nope"), ConfigError);
}

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(WriteFileAtomic, ReplacesContent) {
  const auto path = std::filesystem::temp_directory_path() / "brc_config_test.txt";
  write_file_atomic(path, "one");
  write_file_atomic(path, "two = 2\n");
  EXPECT_EQ(FlatConfig::load(path).require("two"), "2");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace brc
