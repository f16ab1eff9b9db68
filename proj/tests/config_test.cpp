// Copyright 2026 The obsctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <string>

#include <gtest/gtest.h>

#include "config.hpp"

namespace oc::cli {
namespace {

std::string error_of(const std::string& text, Command cmd) {
  try {
    ConfigReader r = ConfigReader::from_string(text, "t.toml");
    (void)load_run_config(r, cmd);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ConfigReader, TypedAccessAndFallbacks) {
  ConfigReader r = ConfigReader::from_string("a = 1\nb = 2.5\nc = true\nd = \"x\"\nm = [[1, 2], [3, 4]]\ndiag = [5, 6]\n");
  EXPECT_EQ(r.integer("a"), 1);
  EXPECT_EQ(r.number("a"), 1.0);
  EXPECT_EQ(r.number("b"), 2.5);
  EXPECT_TRUE(r.boolean("c"));
  EXPECT_EQ(r.string("d"), "x");
  EXPECT_EQ(r.number("missing", 7.0), 7.0);
  const Matrix m = r.matrix("m");
  EXPECT_EQ(m(1, 0), 3.0);
  const Matrix d = r.matrix("diag");
  EXPECT_EQ(d(1, 1), 6.0);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_NO_THROW(r.finish());
  EXPECT_THROW(r.integer("b"), ConfigError);
  EXPECT_THROW(r.string("nope"), ConfigError);
}

TEST(ConfigReader, UnknownKeyReportsLine) {
  ConfigReader r = ConfigReader::from_string("a = 1\n[sec]\nb = 2\ntypo = 3\n", "t.toml");
  r.integer("a");
  r.integer("sec.b");
  try {
    r.finish();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "t.toml:4: field 'sec.typo': unknown key");
  }
}

TEST(ConfigReader, ParseErrorReportsLine) {
  try {
    (void)ConfigReader::from_string("a = 1\nb = = 2\n", "t.toml");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("t.toml:2:"), std::string::npos) << e.what();
  }
}

TEST(LoadRunConfig, MsdDefaults) {
  ConfigReader r = ConfigReader::from_string("[plant]\nkind = \"msd\"\n");
  const RunConfig c = load_run_config(r, Command::simulate);
  EXPECT_EQ(c.plant, "msd");
  EXPECT_EQ(c.controller.algorithm, Algorithm::efficient);
  EXPECT_EQ(c.controller.config.horizon, 50);
  EXPECT_EQ(c.controller.config.rho_tol, 1e-4);
  EXPECT_EQ(c.controller.config.tau_tol, 1e-7);
  EXPECT_EQ(c.msd.t_end, 7.5);
  EXPECT_FALSE(c.msd.penalize_control);
}

TEST(LoadRunConfig, Errors) {
  EXPECT_NE(error_of("[controller]\nhorizon = 5\n", Command::simulate).find("plant"), std::string::npos);
  EXPECT_NE(error_of("[plant]\nkind = \"boat\"\n", Command::simulate).find("unknown plant"), std::string::npos);
  const std::string typo = error_of("[plant]\nkind = \"msd\"\n[controller]\nhorizn = 5\n", Command::simulate);
  EXPECT_EQ(typo, "t.toml:4: field 'controller.horizn': unknown key");
  const std::string shape = error_of("[plant]\nkind = \"msd\"\n[weights]\nstate = [[1.0]]\n", Command::simulate);
  EXPECT_NE(shape.find("t.toml:4: field 'weights.state'"), std::string::npos) << shape;
  EXPECT_NE(error_of("[plant]\nkind = \"msd\"\n[controller]\nhorizon = -1\n", Command::simulate).find("horizon"),
            std::string::npos);
  EXPECT_NE(error_of("[plant]\nkind = \"cartpole\"\n[controller]\nbackend = \"kf\"\n", Command::simulate)
                .find("ekf"),
            std::string::npos);
  EXPECT_NE(error_of("[plant]\nkind = \"cartpole\"\n[controller]\nbackend = \"ukf\"\nalgorithm = \"efficient\"\n",
                     Command::simulate)
                .find("ukf"),
            std::string::npos);
  EXPECT_NE(error_of("[plant]\nkind = \"cartpole\"\n", Command::gains).find("LTI"), std::string::npos);
  EXPECT_NE(error_of("[plant]\nkind = \"msd\"\n[weights]\nstate = [[1.0, 0.0], [0.0, -1.0]]\n", Command::simulate)
                .find("weights"),
            std::string::npos);
}

TEST(LoadRunConfig, GainsForcesFullMeasurement) {
  ConfigReader r = ConfigReader::from_string("[plant]\nkind = \"msd\"\n");
  EXPECT_TRUE(load_run_config(r, Command::gains).msd.penalize_control);
  EXPECT_NE(error_of("[plant]\nkind = \"msd\"\n[weights]\npenalize_control = false\n", Command::gains)
                .find("penalize_control"),
            std::string::npos);
}

TEST(LoadRunConfig, BenchmarkCases) {
  ConfigReader r = ConfigReader::from_string(
      "[benchmark]\ncases = [\"msd/efficient/kf\", \"cartpole/forward_only/ukf\"]\nhorizons = [5, 10, 20]\n");
  const RunConfig c = load_run_config(r, Command::benchmark);
  ASSERT_EQ(c.benchmark.cases.size(), 2u);
  EXPECT_EQ(c.benchmark.cases[1].backend, BackendKind::ukf);
  EXPECT_EQ(c.benchmark.cases[1].mode, ObjectiveMode::gradient);
  EXPECT_NE(error_of("[benchmark]\ncases = [\"msd/efficient\"]\n", Command::benchmark).find("plant/algorithm"),
            std::string::npos);
  EXPECT_NE(error_of("[benchmark]\ncases = [\"cartpole/efficient/ukf\"]\n", Command::benchmark).find("case"),
            std::string::npos);
}

TEST(LoadRunConfig, BundledConfigsLoad) {
  const std::string dir = OBSCTL_CONFIG_DIR;
  EXPECT_NO_THROW(load_run_config(dir + "/msd_step.toml", Command::simulate));
  EXPECT_NO_THROW(load_run_config(dir + "/cartpole_swingup.toml", Command::simulate));
  EXPECT_NO_THROW(load_run_config(dir + "/obstacle.toml", Command::simulate));
  EXPECT_NO_THROW(load_run_config(dir + "/obstacle_gradient.toml", Command::simulate));
  EXPECT_NO_THROW(load_run_config(dir + "/msd_gains.toml", Command::gains));
  EXPECT_NO_THROW(load_run_config(dir + "/termination_study.toml", Command::termination_study));
  EXPECT_NO_THROW(load_run_config(dir + "/benchmark.toml", Command::benchmark));
}

}  // namespace
}  // namespace oc::cli
