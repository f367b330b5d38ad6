#include "blowup/errors.hpp"
#include "blowup/io.hpp"

#include <nlohmann/json.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

using namespace blowup;
using namespace blowup::io;
using geometry::Dim;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

std::string small_file() {
  CurvatureFile f;
  f.n = 11;
  f.points.push_back(geometry::generate_sample(Dim(11), 1, 1.0));
  return curvature_json(f);
}

}  // namespace

TEST(Curvature, RoundTripIsBitExact) {
  CurvatureFile f;
  f.n = 12;
  for (std::uint64_t s = 1; s <= 3; ++s) f.points.push_back(geometry::generate_sample(Dim(12), s, 1.0));
  const CurvatureFile g = parse_curvature_json(curvature_json(f));
  ASSERT_EQ(g.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(g.points[i].label, f.points[i].label);
    EXPECT_EQ(g.points[i].Rbar.data(), f.points[i].Rbar.data());
    EXPECT_EQ(g.points[i].S, f.points[i].S);
    EXPECT_EQ(g.points[i].D2, f.points[i].D2);
    EXPECT_EQ(g.points[i].Rnnnn, f.points[i].Rnnnn);
    EXPECT_EQ(g.points[i].Wbar2, f.points[i].Wbar2);
    EXPECT_EQ(g.points[i].gamma, f.points[i].gamma);
  }
  EXPECT_EQ(curvature_json(g), curvature_json(f));
}

TEST(Curvature, ParseErrorReportsLineAndColumn) {
  const std::string msg = error_of([] { parse_curvature_json("{\n  \"n\": 11,\n  \"points\": [,]\n}", "f.json"); });
  EXPECT_NE(msg.find("f.json:3:"), std::string::npos) << msg;
}

TEST(Curvature, FieldErrorsNameThePath) {
  auto j = nlohmann::json::parse(small_file());
  auto bad = j;
  bad["points"][0]["extra"] = 1;
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("points[0].extra': unknown field"),
            std::string::npos);
  bad = j;
  bad["points"][0].erase("gamma");
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("points[0].gamma': missing field"),
            std::string::npos);
  bad = j;
  bad["points"][0]["S"][3].erase(0);
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("points[0].S[3]'"), std::string::npos);
  bad = j;
  bad["points"][0]["Rbar"][1][2][3][4] = "a";
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("points[0].Rbar[1][2][3][4]'"),
            std::string::npos);
  bad = j;
  bad["n"] = 9;
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("field 'n'"), std::string::npos);
  bad = j;
  bad["top"] = true;
  EXPECT_NE(error_of([&] { parse_curvature_json(bad.dump(), "x"); }).find("'top'"), std::string::npos);
}

TEST(Curvature, ExploratoryDimension) {
  CurvatureFile f;
  f.n = 8;
  f.points.push_back(geometry::generate_sample(Dim(8, true), 1, 1.0));
  const std::string text = curvature_json(f);
  EXPECT_THROW(parse_curvature_json(text), IoError);
  EXPECT_EQ(parse_curvature_json(text, "<x>", true).points.size(), 1u);
}

TEST(Config, RoundTripIsBitExact) {
  RunConfig c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  c.tol_quad = u(rng) * 1e-9;
  c.grid_extent = 64.0 + u(rng);
  c.identity_delta_start = 0.1 * u(rng) + std::numeric_limits<double>::denorm_min();
  c.eps_start = 1.0 / 3.0;
  c.seed = 0xfedcba9876543210ULL;
  c.residual_samples = 123457;
  c.jet = "isotropic";
  c.output_dir = "some/dir with spaces";
  const RunConfig d = parse_config_json(config_json(c));
  EXPECT_EQ(config_json(d), config_json(c));
  EXPECT_EQ(std::memcmp(&d.tol_quad, &c.tol_quad, sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(&d.grid_extent, &c.grid_extent, sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(&d.identity_delta_start, &c.identity_delta_start, sizeof(double)), 0);
  EXPECT_EQ(d.seed, c.seed);
  EXPECT_EQ(d.output_dir, c.output_dir);
  EXPECT_EQ(config_keys().size(), nlohmann::json::parse(config_json(c)).size());
}

TEST(Config, StrictAndPartial) {
  RunConfig base;
  base.n = 13;
  const RunConfig c = parse_config_json(R"({"seed": 9})", base);
  EXPECT_EQ(c.n, 13);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_NE(error_of([] { parse_config_json(R"({"sed": 9})"); }).find("'sed': unknown field"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config_json(R"({"n": "11"})"); }).find("'n'"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config_json(R"({"n": 11.5})"); }).find("'n'"), std::string::npos);
  EXPECT_THROW(parse_config_json("[1]"), IoError);
}

TEST(Config, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.identity_ladder().size(), 6u);
  EXPECT_DOUBLE_EQ(c.identity_ladder().back(), 0.32);
  EXPECT_DOUBLE_EQ(c.residual_ladder().front(), 0.001);
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), Error);
  };
  bad([](RunConfig& c) { c.tol_quad = 0; });
  bad([](RunConfig& c) { c.delta_count = 4; });
  bad([](RunConfig& c) { c.delta_ratio = 1.5; });  // 1.5^5 < 10^1.5
  bad([](RunConfig& c) { c.eps_start = 1.5; });
  bad([](RunConfig& c) { c.weyl_denominator = "other"; });
  bad([](RunConfig& c) { c.rii_convention = "x"; });
  bad([](RunConfig& c) { c.n = 10; });
  bad([](RunConfig& c) { c.slopes = "some"; });
  RunConfig e;
  e.n = 9;
  e.exploratory = true;
  EXPECT_NO_THROW(e.validate());
  e.weyl_denominator = "lemma";
  EXPECT_EQ(e.weyl(), energy::WeylDenominator::Lemma);
}

TEST(Results, CsvRoundTrip) {
  energy::ReducedCoefficients a;
  a.label = "q1";
  a.n = 11;
  a.A = 0.1;
  a.B = 1.0 / 3.0;
  a.phi = -1e-3;
  a.slope_identity = 5.5;
  const auto rows = parse_results_csv(energy::results_csv({a}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].label, "q1");
  EXPECT_EQ(rows[0].B, a.B);
  EXPECT_EQ(rows[0].phi, a.phi);
  EXPECT_TRUE(std::isnan(rows[0].slope_residual));
  EXPECT_EQ(rows[0].slope_identity, 5.5);
  EXPECT_NE(error_of([] { parse_results_csv("wrong\n", "r.csv"); }).find("r.csv:1"), std::string::npos);
  const std::string bad = "label,n,A,B,I2,I4,pairing,G2,G3,phi,slope_residual,slope_identity\nq,11,x,1,1,1,1,1,1,1,1,1\n";
  EXPECT_NE(error_of([&] { parse_results_csv(bad, "r.csv"); }).find("r.csv:2"), std::string::npos);
}

TEST(Files, ReadWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "blowup_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_text((dir / "a.txt").string(), "hello\n");
  EXPECT_EQ(read_text((dir / "a.txt").string()), "hello\n");
  EXPECT_THROW(read_text((dir / "missing.txt").string()), IoError);
  std::filesystem::remove_all(dir.parent_path());
}
