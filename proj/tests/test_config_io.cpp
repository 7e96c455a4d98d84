#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slans/error.hpp"
#include "slans/io.hpp"

using namespace slans;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slans_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  std::vector<std::string> defaults;
  const RunConfig c = parse_config("", &defaults);
  EXPECT_EQ(c, RunConfig{});
  EXPECT_FALSE(defaults.empty());
  EXPECT_NE(std::find(defaults.begin(), defaults.end(), "nu"), defaults.end());
}

TEST(Config, CaseOneFileAccepted) {
  const std::string text =
      "[physics]\nalpha_rule = c_times_h\nc = 1e-3\nT = 1\nnu = 1\n"
      "[discretization]\nn = 48\nk = 1e-3\n[noise]\nM = 10\n";
  std::vector<std::string> defaults;
  const RunConfig c = parse_config(text, &defaults);
  EXPECT_EQ(c.n, 48);
  EXPECT_EQ(c.num_steps(), 1000);
  EXPECT_NEAR(c.resolved_alpha(), 1e-3 * std::sqrt(2.0) / 48, 1e-18);
  EXPECT_EQ(std::find(defaults.begin(), defaults.end(), "alpha_c"), defaults.end());
}

TEST(Config, NonIntegerStepCountRejected) {
  try {
    parse_config("T = 1\nk = 3e-3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("T/k"), std::string::npos);
  }
}

TEST(Config, BadKeysAndValues) {
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("nu = 1\nnu = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("[physics]\nn = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse_config("n = four\n"), ConfigError);
  EXPECT_THROW(parse_config("solver = cg\n"), ConfigError);
  EXPECT_THROW(parse_config("nu = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha_rule = const\nalpha = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("just text\n"), ConfigError);
}

TEST(Config, RegimeViolationsNameTheInequality) {
  try {
    parse_config("regime = alpha_le_Ch\nalpha_rule = const\nalpha = 0.5\nn = 8\n");
    FAIL();
  } catch (const RegimeViolation& e) {
    EXPECT_NE(std::string(e.what()).find("alpha <= C*h"), std::string::npos);
  }
  try {
    parse_config("regime = alpha_fixed\nalpha_rule = const\nalpha = 1\nn = 8\nk = 0.05\nT = 1\n");
    FAIL();
  } catch (const RegimeViolation& e) {
    EXPECT_NE(std::string(e.what()).find("sqrt(k)/h < L"), std::string::npos);
  }
  EXPECT_THROW(validate_regime(Regime::kAlphaFixed, 1e-4, 0.1, 0.5, 1.0, 0.95), RegimeViolation);
  EXPECT_NO_THROW(validate_regime(Regime::kAlphaFixed, 0.9 * 0.01, 0.1, 1.0, 1.0, 0.95));
}

TEST(Config, RoundTripAndHash) {
  RunConfig c;
  c.nu = 0.37;
  c.k = 1.0 / 3.0 * 1e-2;
  c.T = 100 * c.k;
  c.seed = 123456789012345ULL;
  c.solver = SolverKind::kIterative;
  c.regime = Regime::kAlphaLeCh;
  c.check_filter = true;
  const RunConfig back = parse_config(render_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  RunConfig d = c;
  d.out = "elsewhere";
  d.workers = 3;
  EXPECT_EQ(config_hash(d), config_hash(c));
  d.seed += 1;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, CommentsAndAliases) {
  const RunConfig c = parse_config("# header\n[noise]\nM = 4   # modes\nseed = 9\n[physics]\ng = zero\n");
  EXPECT_EQ(c.noise_M, 4);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.g_mode, DiffusionMode::kZero);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/slans.cfg"), IoError);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Io, StateVtkLayout) {
  auto space = MixedSpace::taylor_hood(std::make_shared<const Mesh>(triangulate_unit_square(2)));
  PathState s;
  s.U = Vector::Ones(space->num_velocity_dofs());
  s.V = Vector::Zero(space->num_velocity_dofs());
  s.P = Vector::Ones(space->num_pressure_dofs());
  s.P_tilde = Vector::Zero(space->num_pressure_dofs());
  const fs::path p = scratch("state.vtk");
  write_state_vtk(*space, s, "abc", p);
  const std::string text = slurp(p);
  EXPECT_NE(text.find("# vtk DataFile Version"), std::string::npos);
  EXPECT_NE(text.find("abc"), std::string::npos);
  EXPECT_NE(text.find("POINTS 25 double"), std::string::npos);
  EXPECT_NE(text.find("CELLS 8 56"), std::string::npos);
  EXPECT_NE(text.find("VECTORS U double"), std::string::npos);
  EXPECT_NE(text.find("VECTORS V double"), std::string::npos);
  EXPECT_NE(text.find("SCALARS Pi double"), std::string::npos);
  EXPECT_NE(text.find("SCALARS Pi_tilde double"), std::string::npos);
  fs::remove(p);
}

TEST(Io, DiagnosticsAndEstimatesCsv) {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  {
    DiagnosticsCsv csv(dir / "diagnostics.csv", "h1");
    StepDiagnostics d;
    d.m = 1;
    d.norm_U_alpha = 0.5;
    csv.write(d);
    d.m = 2;
    csv.write(d);
  }
  const std::string diag = slurp(dir / "diagnostics.csv");
  EXPECT_NE(diag.find(DiagnosticsCsv::header()), std::string::npos);
  EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 4);  // hash comment, header, two rows

  write_estimates_csv(dir / "estimates.csv", "h1", {{"n=4", make_estimate("stat", {1.0, 2.0, 3.0})}});
  const std::string est = slurp(dir / "estimates.csv");
  EXPECT_NE(est.find("stat"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Io, ManifestAndOutputDirectoryGuard) {
  const fs::path dir = scratch("manifest");
  RunConfig c;
  prepare_output_dir(dir, config_hash(c));
  {
    RunManifest m(dir, c, "run lans");
    m.begin(0.1, 10, 3);
    m.phase("steps", 1.5);
    m.finish(true);
  }
  std::ifstream in(dir / "manifest.jsonl");
  std::string line;
  std::vector<nlohmann::json> records;
  while (std::getline(in, line)) records.push_back(nlohmann::json::parse(line));
  ASSERT_GE(records.size(), 2u);
  EXPECT_EQ(records.front()["config_hash"], config_hash(c));
  EXPECT_EQ(records.front()["seed"], c.seed);
  EXPECT_TRUE(records.front().contains("version"));
  EXPECT_EQ(records.back()["ok"], true);

  EXPECT_NO_THROW(prepare_output_dir(dir, config_hash(c)));
  RunConfig other = c;
  other.nu = 2.0;
  EXPECT_THROW(prepare_output_dir(dir, config_hash(other)), ConfigError);
  fs::remove_all(dir);
}
