#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(KFP_LAB_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string config(const char* name) { return std::string(KFP_CONFIG_DIR) + "/" + name; }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Cli, MalformedConfigExitsTwo) {
  EXPECT_EQ(run("experiment duality -c " + config("malformed.json") + " -o cli_bad"), 2);
  EXPECT_EQ(run("experiment duality -c does_not_exist.json -o cli_bad"), 2);
  EXPECT_EQ(run("experiment nosuch -c " + config("minimal.json") + " -o cli_bad"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, DualityExperiment) {
  fs::remove_all("cli_duality");
  ASSERT_EQ(run("experiment duality -c " + config("minimal.json") + " -o cli_duality"), 0);
  const auto j = read_json("cli_duality/duality.json");
  EXPECT_EQ(j.at("verdict"), "pass");
  EXPECT_LE(j.at("metrics").at("max_defect").get<double>(), 1e-10);
  EXPECT_TRUE(fs::exists("cli_duality/duality_pairs.csv"));
}

TEST(Cli, CertifyEquilibrium) {
  fs::remove_all("cli_cert");
  ASSERT_EQ(run("certify -c " + config("equilibrium.json") + " -o cli_cert"), 0);
  const auto doc = read_json("cli_cert/certificate.json");
  EXPECT_EQ(doc.at("verdict"), "pass");
  const auto& j = doc.at("certificate");
  EXPECT_LT(j.at("lambda2").get<double>(), 0.0);
  EXPECT_GT(j.at("gamma").get<double>(), 0.0);
  EXPECT_LT(j.at("gamma").get<double>(), 1.0);
  // replaying the written certificate re-verifies it
  EXPECT_EQ(run("certify -c " + config("equilibrium.json") + " -o cli_cert --replay cli_cert/certificate.json"), 0);
  EXPECT_TRUE(fs::exists("cli_cert/replay.json"));
}

TEST(Cli, RunAndSpectrum) {
  fs::remove_all("cli_run");
  ASSERT_EQ(run("run -c " + config("minimal.json") + " -o cli_run"), 0);
  ASSERT_EQ(run("spectrum -c " + config("minimal.json") + " -o cli_run"), 0);
  EXPECT_TRUE(fs::exists("cli_run/spectrum.json"));
  EXPECT_TRUE(fs::exists("cli_run/f1.kfpf"));
  EXPECT_TRUE(fs::exists("cli_run/run.json"));
}
