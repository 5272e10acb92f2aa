#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsms/config.hpp"
#include "nsms/coupled.hpp"
#include "nsms/presets.hpp"
#include "nsms/snapshot_io.hpp"

using namespace nsms;

namespace {

const char* kMinimal = R"(# two species
n_species = 2
molar_masses = 1, 1
diffusivities = 0.1
cells = 16
tau = 0.01
t_end = 0.1
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const RunConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.dimension, 1);
  EXPECT_EQ(c.epsilon, 0.0);
  EXPECT_EQ(c.eta0, 0.0);
  EXPECT_EQ(c.newton_tol, 1e-10);
  EXPECT_EQ(c.fixedpoint_tol, 1e-14);
  EXPECT_EQ(c.div_tol, 1e-10);
  EXPECT_EQ(c.lengths, std::vector<double>{1.0});
  EXPECT_EQ(c.velocity, "zero");
}

TEST(Config, WrongDiffusivityCountNamesExpected) {
  const std::string e = error_of(
      "n_species = 4\nmolar_masses = 1,2,3,4\ndiffusivities = 1,1,1\ncells = 8\ntau = 1\nt_end = 1\n");
  EXPECT_NE(e.find("expected 6 entries"), std::string::npos) << e;
  EXPECT_NE(e.find("4 choose 2"), std::string::npos) << e;
  EXPECT_NE(e.find("line 3"), std::string::npos) << e;
}

TEST(Config, DuplicateKeyReportsBothLines) {
  const std::string e = error_of(std::string(kMinimal) + "tau = 0.02\n");
  EXPECT_NE(e.find("line 8"), std::string::npos) << e;
  EXPECT_NE(e.find("line 6"), std::string::npos) << e;
  EXPECT_NE(e.find("duplicate"), std::string::npos) << e;
}

TEST(Config, SyntaxErrorsAreLineNumbered) {
  EXPECT_NE(error_of("n_species 2\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("\n\nfoo = 1\n").find("line 3: unknown key 'foo'"), std::string::npos);
  EXPECT_NE(error_of("cells = 1x\n").find("line 1"), std::string::npos);
}

TEST(Config, EveryViolatedRuleIsListed) {
  const std::string e = error_of(
      "dimension = 2\nn_species = 3\nmolar_masses = 1, 2\ndiffusivities = 1,1,1\n"
      "cells = 8\ntau = -1\nt_end = 0\nbase_composition = 0.5, 0.6, 0.2\n"
      "perturbation = 1, 1, 1\nscenario = wave\n");
  for (const char* needle : {"cells: expected 2", "molar_masses: expected 3",
                             "tau must be > 0", "t_end must be > 0", "sum to 1", "sum to 0",
                             "scenario must be"}) {
    EXPECT_NE(e.find(needle), std::string::npos) << needle << "\n" << e;
  }
}

TEST(Config, GammaExcludesTauAndEpsilon) {
  std::string t = kMinimal;
  t += "gamma = 0.01\nepsilon = 0.1\n";
  const std::string e = error_of(t);
  EXPECT_NE(e.find("tau is derived from gamma"), std::string::npos) << e;
  EXPECT_NE(e.find("epsilon is derived from gamma"), std::string::npos) << e;
}

TEST(Config, TooLargeAmplitudeIsRejectedBySetup) {
  const RunConfig c = parse_config(std::string(kMinimal) + "amplitude = 0.7\n");
  EXPECT_THROW(build_setup(c), ConfigError);
}

TEST(Config, TextRoundTrip) {
  for (const auto& p : presets()) {
    const RunConfig c = parse_config(p.text);
    const RunConfig d = parse_config(to_text(c));
    EXPECT_EQ(to_text(c), to_text(d)) << p.name;
  }
}

TEST(Config, LoadFileErrors) {
  EXPECT_THROW(load_config_file("/nonexistent/nsms.cfg"), ConfigError);
}

TEST(Presets, AllPassCheck) {
  ASSERT_EQ(presets().size(), 4u);
  for (const char* name :
       {"fick-limit-1d", "three-species-1d", "two-species-2d-vortex", "paper-schedule"}) {
    const Preset* p = find_preset(name);
    ASSERT_NE(p, nullptr) << name;
    EXPECT_NO_THROW(build_setup(parse_config(p->text))) << name;
  }
  EXPECT_EQ(find_preset("nope"), nullptr);
}

TEST(Run, StepCountAndTimeStep) {
  const auto s = build_setup(parse_config(
      "n_species = 2\nmolar_masses = 1, 1\ndiffusivities = 0.1\ncells = 8\ntau = 0.3\nt_end = 1\n"));
  EXPECT_EQ(s.steps, 4);
  EXPECT_DOUBLE_EQ(s.params.tau(), 0.25);
}

TEST(Run, DeterministicOutputFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "nsms_test_run";
  std::filesystem::remove_all(dir);
  RunConfig c = parse_config(std::string(kMinimal) + "amplitude = 0.1\nsnapshot_interval = 5\n");
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    c.output_dir = (dir / std::to_string(rep)).string();
    const RunResult r = run_simulation(c);
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(r.history.size(), 11u);
    std::ifstream in(r.diagnostics_path);
    std::stringstream ss;
    ss << in.rdbuf();
    if (rep == 0) first = ss.str();
    else EXPECT_EQ(first, ss.str());
    EXPECT_EQ(ss.str(), diagnostics_csv(r.history));
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "snap_00000000.csv"));
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "snap_00000005.csv"));
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "snap_00000010.csv"));
  }
  const std::string header = first.substr(0, first.find('\n'));
  EXPECT_EQ(header,
            "step,time,H,H_star,diss_Bww,diss_sqrtx,eps_norm,mass_1,mass_2,c_mass,"
            "kinetic_energy,max_div,min_rho,max_rho,advection_defect");
  std::filesystem::remove_all(dir);
}

TEST(SnapshotIo, NumberFormatRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(snapshot_name(42), "snap_00000042.csv");
}
