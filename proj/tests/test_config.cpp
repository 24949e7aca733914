#include <gtest/gtest.h>

#include "octseg/config.hpp"
#include "test_support.hpp"

using namespace octseg;
using namespace octseg::config;

namespace {

ErrorCode config_error(const std::string& text) {
    try {
        run_config_from_json(parse_json_text(text, "test")).validate();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "accepted: " << text;
    return ErrorCode::IoError;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
    const RunConfig cfg;
    const json j = to_json(cfg);
    EXPECT_EQ(to_json(run_config_from_json(j)), j);
}

TEST(Config, EmptyObjectGivesDefaults) {
    EXPECT_EQ(to_json(run_config_from_json(parse_json_text("{}", "test"))), to_json(RunConfig{}));
}

TEST(Config, PartialOverride) {
    const RunConfig cfg = run_config_from_json(
        parse_json_text(R"({"phase2": {"k": 0.8, "shift_px": 4}, "io": {"jobs": 3, "formats": ["json"]}})", "test"));
    EXPECT_EQ(cfg.segment.phase2.k, 0.8);
    EXPECT_EQ(cfg.segment.phase2.shift_px, 4);
    EXPECT_EQ(cfg.segment.phase2.depth_px, 5);
    EXPECT_EQ(cfg.io.jobs, 3);
    EXPECT_FALSE(cfg.io.wants("csv"));
    EXPECT_TRUE(cfg.io.wants("json"));
}

TEST(Config, Rejections) {
    EXPECT_EQ(config_error(R"({"phase2": {"k": 1.5}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error(R"({"phase2": {"kk": 0.9}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error(R"({"graph": {"w_min": "small"}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error(R"({"preprocess": {"smooth_kernel": 4}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error(R"({"io": {"formats": ["xml"]}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error(R"({"io": {"jobs": 0}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error("[1, 2"), ErrorCode::ConfigError);
}

TEST(Config, FixedThreshold) {
    const RunConfig cfg = run_config_from_json(
        parse_json_text(R"({"preprocess": {"binarize_method": "fixed", "fixed_threshold": 0.4}})", "test"));
    EXPECT_EQ(cfg.segment.preprocess.binarize_method, preprocess::BinarizeMethod::Fixed);
    EXPECT_EQ(cfg.segment.preprocess.fixed_threshold, 0.4);
    EXPECT_EQ(config_error(R"({"preprocess": {"binarize_method": "fixed"}})"), ErrorCode::ConfigError);
}

TEST(Config, PhantomSpecRoundTrip) {
    phantom::PhantomSpec spec = phantom::PhantomSpec::default_spec();
    spec.vessels.push_back({60, 3, 0.4});
    spec.bands.push_back({});
    spec.speckle_sigma = 0.07;
    spec.seed = 123456789012345ULL;
    const json j = to_json(spec);
    const phantom::PhantomSpec back = phantom_spec_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.seed, spec.seed);
    EXPECT_EQ(phantom::generate(back).image.pixels, phantom::generate(spec).image.pixels);
}

TEST(Config, CurveShorthand) {
    const phantom::PhantomSpec spec =
        phantom_spec_from_json(parse_json_text(R"({"ilm_curve": 30, "rnfl_curve": [[0, 40], [255, 44]]})", "test"));
    EXPECT_EQ(spec.ilm(100), 30.0);
    EXPECT_EQ(spec.rnfl(0), 40.0);
    EXPECT_EQ(spec.rnfl(255), 44.0);
}

TEST(Config, FileNotFound) {
    support::TempDir dir;
    EXPECT_THROW(load_run_config(dir / "nope.json"), Error);
}

TEST(Config, ShippedDefaultFileMatchesBuiltIns) {
    const RunConfig shipped = load_run_config(std::filesystem::path(OCTSEG_SOURCE_DIR) / "configs/default.json");
    EXPECT_EQ(to_json(shipped), to_json(RunConfig{}));
}
