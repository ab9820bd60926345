#include <gtest/gtest.h>

#include <string>

#include "kfp/config.hpp"

using namespace kfp;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const RunConfig c = parse_config_string(R"({"grid": {"Nx": 8, "Nv": 16}, "model": {"name": "harmonic"}})");
  EXPECT_EQ(c.grid.Nx, 8u);
  EXPECT_EQ(c.grid.Nv, 16u);
  EXPECT_EQ(c.grid.L, 1.0);
  EXPECT_EQ(c.grid.V, 5.0);
  EXPECT_EQ(c.boundary.iota_s, 0.5);
  EXPECT_EQ(c.scheme.kind, "implicit_euler");
  EXPECT_EQ(c.certificate.eps, 0.125);
  EXPECT_EQ(c.duality.pairs, 20u);
  EXPECT_EQ(c.weight.kind, "flat");
  // the emitted config is complete and parses back to the same hash
  const RunConfig back = parse_config_json(to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_TRUE(to_json(c).contains("ultracontractivity"));
}

TEST(Config, AccommodationSumRejected) {
  const std::string e = error_of(R"({"boundary": {"iota_s": 0.7, "iota_d": 0.5}})");
  EXPECT_NE(e.find("iota_S + iota_D <= 1"), std::string::npos) << e;
}

TEST(Config, ExpWeightRateRejected) {
  const std::string e =
      error_of(R"({"grid": {"V": 5}, "model": {"name": "power", "gamma": 1.5, "b0": 1.0},
                  "weight": {"kind": "exp", "zeta": 0.45, "s": 1.5}})");
  EXPECT_NE(e.find("s = gamma < 2"), std::string::npos) << e;
  EXPECT_NE(e.find("b0/2"), std::string::npos) << e;
  EXPECT_EQ(error_of(R"({"model": {"name": "power", "gamma": 1.5}, "weight": {"kind": "exp", "zeta": 0.2, "s": 1.5}})"),
            "");
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_NE(error_of(R"({"grid": {"Nz": 4}})").find("$.grid.Nz: unknown key"), std::string::npos);
  EXPECT_NE(error_of(R"({"extra": 1})").find("$.extra"), std::string::npos);
}

TEST(Config, TypeAndSyntaxErrors) {
  EXPECT_NE(error_of(R"({"grid": {"Nx": "many"}})").find("$.grid.Nx"), std::string::npos);
  EXPECT_NE(error_of("{not json").find("not valid JSON"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").find("JSON object"), std::string::npos);
  EXPECT_NE(error_of(R"({"grid": {"Nv": 15}})").find("even"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": {"name": "quartic"}})"), "");
  EXPECT_NE(error_of(R"({"certificate": {"T0": 0.3, "T1": 0.2}})").find("T0 < T1"), std::string::npos);
  EXPECT_NE(error_of(R"({"weight": {"kind": "poly", "k": 1}})").find("k_*"), std::string::npos);
}

TEST(Config, AlignedDefaultStep) {
  const RunConfig c = parse_config_string(R"({"grid": {"Nx": 24, "Nv": 48, "V": 5}})");
  const PhaseGrid g = to_grid(c.grid);
  const TimeScheme s = to_scheme(c.scheme, g);
  EXPECT_LE(s.dt, default_dt(g));
  // multiples of 0.01 divide exactly
  EXPECT_NO_THROW(steps_for(0.5, s.dt));
  EXPECT_NO_THROW(steps_for(0.01, s.dt));
}

TEST(Config, HashChangesWithContent) {
  RunConfig a, b;
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a), config_hash(RunConfig{}));
}
