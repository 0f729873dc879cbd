#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "mlnl/config.hpp"

using namespace mlnl;

TEST(Config, DefaultsHaveAllSections) {
    const auto& c = default_config();
    for (const char* s : {"verify-lemma61", "counterexample", "solve", "barriers", "norms"}) EXPECT_TRUE(c.contains(s)) << s;
    EXPECT_EQ(c["solve"]["seed"], 0);
    EXPECT_EQ(c["counterexample"]["s"], "3/8");
}

TEST(Config, TextOverridesAreTyped) {
    auto c = parse_config_text("# comment\n[solve]\nN = 256   # trailing\ns = 0.6\ngrading = 3\n\n[barriers]\nlambdas = \"20,40\"\n");
    EXPECT_EQ(c["solve"]["N"], 256);
    EXPECT_TRUE(c["solve"]["N"].is_number_integer());
    EXPECT_EQ(c["solve"]["s"], "0.6");
    EXPECT_TRUE(c["solve"]["grading"].is_number_float());
    EXPECT_EQ(c["solve"]["grading"].get<double>(), 3.0);
    EXPECT_EQ(c["barriers"]["lambdas"], "20,40");
    EXPECT_EQ(c["solve"]["kernel"], "fractional");
}

TEST(Config, RejectsUnknownAndMalformed) {
    EXPECT_THROW(parse_config_text("[solve]\nbogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[nope]\n"), ConfigError);
    EXPECT_THROW(parse_config_text("N = 5\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[solve]\nN = 5.5\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[solve]\nN\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[solve\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[solve]\ndamping = fast\n"), ConfigError);
    EXPECT_THROW(parse_config_json(R"({"solve": {"N": "many"}})"), ConfigError);
    EXPECT_THROW(parse_config_json(R"({"solve": {"zzz": 1}})"), ConfigError);
    EXPECT_THROW(parse_config_json("{not json"), ConfigError);
    EXPECT_THROW(parse_config_json("[1,2]"), ConfigError);
}

TEST(Config, JsonIntegerAcceptedForFloatKey) {
    auto c = parse_config_json(R"({"solve": {"damping": 1, "N": 64}})");
    EXPECT_TRUE(c["solve"]["damping"].is_number_float());
    EXPECT_EQ(c["solve"]["N"], 64);
}

TEST(Config, TextRoundTrip) {
    auto c = parse_config_text("[solve]\nN = 300\ngrading = 2.5\n[norms]\nM = 0.1\n");
    auto text = to_config_text(c);
    EXPECT_EQ(parse_config_text(text), c);
    EXPECT_EQ(to_config_text(default_config()).find("seed = 0") != std::string::npos, true);
    EXPECT_EQ(parse_config_text(to_config_text(default_config())), default_config());
}

TEST(Config, FormatValue) {
    EXPECT_EQ(format_value(Config(2.0)), "2.0");
    EXPECT_EQ(format_value(Config(0.1)), "0.1");
    EXPECT_EQ(format_value(Config(1e-6)), "1e-06");
    EXPECT_EQ(format_value(Config(7)), "7");
    EXPECT_EQ(format_value(Config("3/4")), "3/4");
}

TEST(Config, HashIsStableAndSensitive) {
    auto a = default_config(), b = default_config();
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b["solve"]["N"] = 1023;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, PresetsAndBundledFiles) {
    auto preset = load_config("thm11_s075");
    EXPECT_EQ(preset["solve"]["s"], "3/4");
    EXPECT_EQ(preset["solve"]["grid"], "graded");
    const std::string dir = MLNL_SOURCE_DIR "/configs/";
    EXPECT_EQ(load_config(dir + "thm11_s075.cfg"), preset);
    auto fp = load_config(dir + "fixed_point_s025.json");
    EXPECT_EQ(fp["solve"]["method"], "both");
    EXPECT_EQ(load_config(dir + "counterexample_s038.cfg")["counterexample"]["k"], 2);
    EXPECT_THROW(load_config(dir + "missing.cfg"), ConfigError);
}

TEST(Lists, SplitAndParse) {
    EXPECT_EQ(split_list(" a, b ,,c "), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(split_list("1:0;2:1", ';').size(), 2u);
    EXPECT_EQ(parse_doubles("20, 40,1e-3", "x"), (std::vector<double>{20, 40, 1e-3}));
    EXPECT_THROW(parse_doubles("", "x"), ConfigError);
    EXPECT_THROW(parse_doubles("1,two", "x"), ConfigError);
    EXPECT_THROW(parse_doubles("1.5x", "x"), ConfigError);
}

TEST(Coefficients, NamedAndNumeric) {
    EXPECT_EQ(make_coefficient("one")(0.3), 1.0);
    EXPECT_EQ(make_coefficient("zero")(0.3), 0.0);
    EXPECT_EQ(make_coefficient("2.5")(0.9), 2.5);
    EXPECT_NEAR(make_coefficient("xpow", 0.5)(0.25), 2.0, 1e-15);
    EXPECT_NEAR(make_coefficient("sin7", 0.5)(0.75), 2.0 * (1 + 0.3 * std::sin(5.25)), 1e-14);
    EXPECT_LT(make_coefficient("neg_bump")(0.3), 0.0);
    EXPECT_THROW(make_coefficient("nonsense"), ConfigError);
    EXPECT_THROW(make_coefficient("1.5x"), ConfigError);
    EXPECT_EQ(coefficient_names().size(), 9u);
}
