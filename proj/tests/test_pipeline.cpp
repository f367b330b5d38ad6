#include "blowup/errors.hpp"
#include "blowup/pipeline.hpp"

#include <nlohmann/json.hpp>
#include <gtest/gtest.h>

#include <filesystem>

using namespace blowup;
using namespace blowup::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "blowup_pipeline_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

io::RunConfig quick(const fs::path& out) {
  io::RunConfig c;
  c.output_dir = out.string();
  c.battery_size = 3;
  c.grid_nodes = 96;
  c.slopes = "identity";
  return c;
}

}  // namespace

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code(ErrorKind::Validation), 2);
  EXPECT_EQ(exit_code(ErrorKind::Structural), 2);
  EXPECT_EQ(exit_code(ErrorKind::Domain), 2);
  EXPECT_EQ(exit_code(ErrorKind::Budget), 3);
  EXPECT_EQ(exit_code(ErrorKind::Numeric), 3);
  EXPECT_EQ(exit_code(ErrorKind::Io), 4);
  EXPECT_EQ(guarded([]() -> CommandResult { throw IoError("x"); }).exit_code, 4);
  EXPECT_EQ(guarded([]() -> CommandResult { throw BudgetError("x", 0, 0); }).exit_code, 3);
  EXPECT_EQ(guarded([] { return CommandResult{}; }).exit_code, 0);
}

TEST(Pipeline, ZeroCurvaturePointHasNoAdmissibleFamily) {
  const fs::path dir = scratch("zero");
  io::CurvatureFile f;
  f.n = 11;
  f.points.push_back(geometry::CurvaturePoint::zero(geometry::Dim(11), "flat"));
  io::write_text((dir / "in.json").string(), io::curvature_json(f));
  io::RunConfig c = quick(dir / "out");
  c.input = (dir / "in.json").string();
  const CommandResult r = guarded([&] { return cmd_pipeline(c); });
  EXPECT_EQ(r.exit_code, kValidationFailure);
  EXPECT_NE(io::read_text((dir / "out" / "quarantine.csv").string()).find("flat"), std::string::npos);
  EXPECT_EQ(io::read_text((dir / "out" / "family.csv").string()), "epsilon,delta,peak,phi_bound\n");
}

TEST(Pipeline, CorruptInputIsIoError) {
  const fs::path dir = scratch("corrupt");
  io::write_text((dir / "in.json").string(), "{\"n\": 11,\n \"points\": [\n");
  io::RunConfig c = quick(dir / "out");
  c.input = (dir / "in.json").string();
  const CommandResult r = guarded([&] { return cmd_pipeline(c); });
  EXPECT_EQ(r.exit_code, kIoFailure);
  ASSERT_FALSE(r.messages.empty());
  EXPECT_NE(r.messages[0].find("in.json:"), std::string::npos);
  c.input = (dir / "missing.json").string();
  EXPECT_EQ(guarded([&] { return cmd_pipeline(c); }).exit_code, kIoFailure);
}

TEST(Pipeline, InvalidCurvatureIsQuarantined) {
  const fs::path dir = scratch("invalid");
  io::CurvatureFile f;
  f.n = 11;
  f.points.push_back(geometry::generate_sample(geometry::Dim(11), 1, 1.0));
  auto bad = geometry::generate_sample(geometry::Dim(11), 2, 1.0);
  bad.label = "broken";
  bad.S(0, 0) += 0.5;
  f.points.push_back(bad);
  io::write_text((dir / "in.json").string(), io::curvature_json(f));
  io::RunConfig c = quick(dir / "out");
  c.input = (dir / "in.json").string();
  c.slopes = "none";
  const CommandResult r = guarded([&] { return cmd_pipeline(c); });
  EXPECT_EQ(r.exit_code, kPass);
  const auto rep = nlohmann::json::parse(io::read_text((dir / "out" / "reduction.json").string()));
  EXPECT_EQ(rep["q0"], "q1");
  EXPECT_NE(io::read_text((dir / "out" / "quarantine.csv").string()).find("broken"), std::string::npos);
}

TEST(Pipeline, BatteryIsDeterministic) {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const CommandResult ra = guarded([&] { return cmd_pipeline(quick(a)); });
  const CommandResult rb = guarded([&] { return cmd_pipeline(quick(b)); });
  ASSERT_EQ(ra.exit_code, kPass) << (ra.messages.empty() ? "" : ra.messages[0]);
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (const auto& e : fs::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    EXPECT_EQ(io::read_text(e.path().string()), io::read_text((b / name).string())) << name;
  }
  const auto rows = io::parse_results_csv(io::read_text((a / "results.csv").string()));
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_LT(r.phi, 0.0);
    EXPECT_GE(r.slope_identity, 4.5);
  }
}

TEST(Commands, ReduceAndFamilyFromResults) {
  const fs::path dir = scratch("reduce");
  io::RunConfig c = quick(dir);
  c.slopes = "none";
  ASSERT_EQ(guarded([&] { return cmd_phi(c); }).exit_code, kPass);
  EXPECT_EQ(guarded([&] { return cmd_reduce(c); }).exit_code, kPass);
  EXPECT_TRUE(fs::exists(dir / "reduction.json"));
  EXPECT_EQ(guarded([&] { return cmd_family(c); }).exit_code, kPass);
  const std::string fam = io::read_text((dir / "family.csv").string());
  EXPECT_EQ(std::count(fam.begin(), fam.end(), '\n'), 1 + c.eps_count);

  // 1D neighbourhood: γ constant, φ(q) = φ₀(1 + q²), a maximum in q at 0
  const auto rows = io::parse_results_csv(io::read_text((dir / "results.csv").string()));
  const std::string q0 = nlohmann::json::parse(io::read_text((dir / "reduction.json").string()))["q0"];
  double g0 = 0.0, p0 = 0.0;
  for (const auto& pt : load_points(c).points)
    if (pt.label == q0) g0 = pt.gamma;
  for (const auto& r : rows)
    if (r.label == q0) p0 = r.phi;
  nlohmann::json nb = {{"q0", {0.0}}, {"h", 0.1}, {"lower", {-1.0}}, {"upper", {1.0}}, {"samples", nlohmann::json::array()}};
  for (int k = -1; k <= 1; ++k)
    nb["samples"].push_back({{"q", {0.1 * k}}, {"gamma", g0}, {"phi", p0 * (1.0 + 0.01 * k * k)}});
  io::write_text((dir / "nb.json").string(), nb.dump());
  c.neighborhood = (dir / "nb.json").string();
  EXPECT_EQ(guarded([&] { return cmd_reduce(c); }).exit_code, kPass);
  const auto rep = nlohmann::json::parse(io::read_text((dir / "reduction.json").string()));
  EXPECT_EQ(rep["hessian"]["classification"], "negative-definite");
  EXPECT_LT(rep["hessian"]["lambda_lambda_rel_error"].get<double>(), 1e-3);
  nb["samples"][1].erase("phi");
  io::write_text((dir / "nb.json").string(), nb.dump());
  const CommandResult bad = guarded([&] { return cmd_reduce(c); });
  EXPECT_EQ(bad.exit_code, kIoFailure);
  EXPECT_NE(bad.messages.front().find("samples[1]"), std::string::npos);
}

TEST(Commands, MomentsBudgetFailure) {
  io::RunConfig c = quick(scratch("moments"));
  EXPECT_EQ(guarded([&] { return cmd_moments(c); }).exit_code, kPass);
  c.tol_quad = 1e-20;
  EXPECT_EQ(guarded([&] { return cmd_moments(c); }).exit_code, kNumericFailure);
}

TEST(Commands, ConfigValidationFailure) {
  io::RunConfig c = quick(scratch("badcfg"));
  c.delta_count = 3;
  EXPECT_EQ(guarded([&] { return cmd_pipeline(c); }).exit_code, kValidationFailure);
}
