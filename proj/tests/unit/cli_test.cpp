#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "pipeline.hpp"
#include "zitterwalk/error.hpp"

namespace zitterwalk::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string error_of(const json& doc) {
  try {
    (void)parse_config(doc);
  } catch (const ConfigurationError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, MinimalFreeScenarioTakesDefaults) {
  const auto c = parse_config(json{{"scenario", "free"}});
  EXPECT_EQ(c.scenario, Scenario::free);
  EXPECT_EQ(c.scale.hbar, 1.0);
  EXPECT_EQ(c.scale.mass, 1.0);
  EXPECT_EQ(c.n_steps, 1'000'000u);
  EXPECT_EQ(c.horizon, 1.0);
  EXPECT_EQ(c.n_paths, 10'000u);
  EXPECT_DOUBLE_EQ(c.k_low, 0.1);
  EXPECT_DOUBLE_EQ(c.k_high, 10.0);
  EXPECT_EQ(c.analyses.size(), 6u);
  EXPECT_EQ(c.reference_steps, 10'000u);
  EXPECT_EQ(c.record_stride, 1000u);
  EXPECT_EQ(c.comparison_times, (std::vector<double>{0.25, 0.5, 1.0}));
}

TEST(Config, BandFollowsThePhysicalScale) {
  const auto c = parse_config(json{{"scenario", "free"}, {"hbar", 2.0}, {"mass", 4.0}});
  EXPECT_DOUBLE_EQ(c.k_low, 0.05);
  EXPECT_DOUBLE_EQ(c.k_high, 5.0);
  EXPECT_DOUBLE_EQ(c.field().constant_volatility(), std::sqrt(0.5));
}

TEST(Config, OuNeedsOmega) {
  const auto msg = error_of(json{{"scenario", "ou_nelson"}});
  EXPECT_NE(msg.find("omega"), std::string::npos) << msg;
  const auto c = parse_config(json{{"scenario", "ou_nelson"}, {"omega", 2.0}});
  EXPECT_EQ(*c.affine_drift_slope(), -2.0);
  EXPECT_EQ(*c.effective_lipschitz(), 2.0);
  EXPECT_NE(error_of(json{{"scenario", "free"}, {"omega", 1.0}}).find("omega"), std::string::npos);
}

TEST(Config, FlagsOverrideFileValues) {
  const json file{{"scenario", "free"}, {"n_paths", 10000}};
  const auto c = parse_config(merge_config(file, json{{"n_paths", 500}}));
  EXPECT_EQ(c.n_paths, 500u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_NE(error_of(json{{"scenario", "free"}, {"n_path", 3}}).find("n_path"), std::string::npos);
  EXPECT_NE(error_of(json{{"n_paths", -3}}).find("n_paths"), std::string::npos);
  EXPECT_NE(error_of(json{{"n_paths", 2.5}}).find("n_paths"), std::string::npos);
  EXPECT_NE(error_of(json{{"horizon", "long"}}).find("horizon"), std::string::npos);
  EXPECT_NE(error_of(json{{"k_low", 5}, {"k_high", 1}}).find("k_high"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 7}}).find("schema_version"), std::string::npos);
  EXPECT_NE(error_of(json{{"analyses", {"heisenberg", "astrology"}}}).find("astrology"), std::string::npos);
  EXPECT_NE(error_of(json{{"min_count", 10}}).find("min_count"), std::string::npos);
  EXPECT_NE(error_of(json{{"scenario", "quantum"}}).find("scenario"), std::string::npos);
  EXPECT_NE(error_of(json{{"x0", {{"distribution", "normal"}, {"mean", 0}}}}).find("x0.stddev"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"comparison_times", {0.5, 2.0}}}).find("comparison_times"), std::string::npos);
  EXPECT_NE(error_of(json::array()).find("object"), std::string::npos);
}

TEST(Config, IntegralFloatsAreCounts) {
  const auto c = parse_config(json::parse(R"({"n_steps": 1e5, "n_paths": 2e3})"));
  EXPECT_EQ(c.n_steps, 100'000u);
  EXPECT_EQ(c.n_paths, 2'000u);
  EXPECT_EQ(c.reference_steps, 10'000u);
  EXPECT_EQ(c.record_stride, 100u);
}

TEST(Config, CustomScenario) {
  EXPECT_NE(error_of(json{{"scenario", "custom"}}).find("volatility"), std::string::npos);
  const auto affine = parse_config(json{{"scenario", "custom"}, {"drift", {0.5, -3.0}}, {"volatility", {1.0}}});
  EXPECT_EQ(*affine.affine_drift_slope(), -3.0);
  EXPECT_EQ(*affine.effective_lipschitz(), 3.0);
  EXPECT_DOUBLE_EQ(affine.field().drift(0.0, 2.0), 0.5 - 6.0);
  const json quadratic{{"scenario", "custom"}, {"drift", {0.0, 0.0, 1.0}}, {"volatility", {1.0}}};
  EXPECT_NE(error_of(quadratic).find("lipschitz_bound"), std::string::npos);
  auto declared = quadratic;
  declared["lipschitz_bound"] = 4.0;
  EXPECT_FALSE(parse_config(declared).affine_drift_slope().has_value());
}

TEST(Config, EffectiveConfigRoundTrips) {
  const json doc{{"scenario", "ou_nelson"},
                 {"omega", 1.5},
                 {"x0", {{"distribution", "uniform"}, {"low", -1}, {"high", 2}}},
                 {"n_steps", 4096},
                 {"analyses", {"markov", "heisenberg"}},
                 {"ks_threshold", 0.02}};
  const auto c = parse_config(doc);
  EXPECT_EQ(c.initial_center(), 0.5);
  const auto again = parse_config(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
  EXPECT_FALSE(c.to_json().contains("out_dir"));
}

TEST(Config, MalformedFileReportsThePosition) {
  const auto file = fs::temp_directory_path() / "zitterwalk_bad_config.json";
  std::ofstream(file) << "{\n  \"scenario\": \"free\",\n  \"n_paths\": ,\n}\n";
  try {
    (void)load_config_file(file);
    FAIL();
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  fs::remove(file);
}

// --- the binary -------------------------------------------------------------------

class Binary : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("zitterwalk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + ZITTERWALK_BINARY + " --quiet " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& file) {
    std::ifstream in(file);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
  json read_json(const fs::path& file) { return json::parse(read(file)); }

  fs::path write_config(const json& doc) {
    const auto file = dir_ / "config.json";
    std::ofstream(file) << doc.dump(2);
    return file;
  }

  fs::path dir_;
};

const char* kSmall = "--n-steps 4096 --n-paths 400 --calibration-pairs 10";

TEST_F(Binary, HeisenbergOnTheFreeScenarioPasses) {
  ASSERT_EQ(run(std::string("run --scenario free --analyses heisenberg ") + kSmall + " --out-dir " +
                (dir_ / "out").string()),
            0)
      << read(dir_ / "stderr.txt");
  const auto h = read_json(dir_ / "out" / "heisenberg.json");
  EXPECT_EQ(h["pass"], true);
  EXPECT_EQ(h["schema_version"], 1);
  EXPECT_EQ(h["report"]["violation_count"], 0);
  EXPECT_EQ(h["report"]["n_ratios"], 4096 * 400);
}

TEST_F(Binary, ZeroVolatilityIsANumericError) {
  const auto cfg = write_config({{"scenario", "custom"}, {"drift", {0.0}}, {"volatility", {0.0}},
                                 {"analyses", {"heisenberg"}}, {"n_steps", 100}, {"n_paths", 10}});
  EXPECT_EQ(run("run --config " + cfg.string() + " --out-dir " + (dir_ / "out").string()), 3);
  EXPECT_NE(read(dir_ / "stderr.txt").find("degenerate"), std::string::npos);
  const auto summary = read_json(dir_ / "out" / "summary.json");
  EXPECT_EQ(summary["exit_code"], 3);
  EXPECT_EQ(summary["error"]["kind"], "degenerate_volatility");
  EXPECT_EQ(summary["error"]["site"]["step"], 0);
}

TEST_F(Binary, ConfigurationErrorsExitTwo) {
  const auto cfg = write_config({{"scenario", "free"}, {"colour", "blue"}});
  EXPECT_EQ(run("run --config " + cfg.string()), 2);
  EXPECT_NE(read(dir_ / "stderr.txt").find("colour"), std::string::npos);
  EXPECT_EQ(run("run --scenario ou_nelson"), 2);
  EXPECT_NE(read(dir_ / "stderr.txt").find("omega"), std::string::npos);
  EXPECT_EQ(run("run --n-paths lots"), 2);
  EXPECT_EQ(run("run --no-such-flag"), 2);
  EXPECT_EQ(run("run --scenario free", "ZITTERWALK_THREADS=zero"), 2);
}

TEST_F(Binary, FlagBeatsFile) {
  const auto cfg = write_config({{"scenario", "free"}, {"n_paths", 10000}, {"n_steps", 256},
                                 {"analyses", {"heisenberg"}}});
  ASSERT_EQ(run("run --config " + cfg.string() + " --n-paths=500 --out-dir " + (dir_ / "out").string()), 0);
  EXPECT_EQ(read_json(dir_ / "out" / "summary.json")["config"]["n_paths"], 500);
}

TEST_F(Binary, FailingAnalysisExitsOne) {
  EXPECT_EQ(run(std::string("run --analyses heisenberg --k-low 2 --k-high 3 ") + kSmall + " --out-dir " +
                (dir_ / "out").string()),
            1);
  const auto summary = read_json(dir_ / "out" / "summary.json");
  EXPECT_EQ(summary["pass"], false);
  EXPECT_EQ(summary["analyses"]["heisenberg"]["pass"], false);
}

// Small ensembles: individual verdicts may fail (exit 1), the reports must still be complete.
TEST_F(Binary, AllAnalysesWriteTheirReports) {
  const int code = run(std::string("run --scenario ou_nelson --omega 1 --n-steps 16384 --n-paths 2000 "
                                   "--min-count 100 --calibration-pairs 10 --out-dir ") +
                       (dir_ / "out").string());
  ASSERT_TRUE(code == 0 || code == 1) << read(dir_ / "stderr.txt");
  for (const char* name : {"heisenberg", "decompose", "markov", "equivalence", "stability", "fractal"}) {
    const auto doc = read_json(dir_ / "out" / (std::string(name) + ".json"));
    EXPECT_EQ(doc["schema_version"], 1) << name;
    EXPECT_EQ(doc["analysis"], name);
    EXPECT_TRUE(doc["pass"].is_boolean());
  }
  const auto summary = read_json(dir_ / "out" / "summary.json");
  EXPECT_EQ(summary["schema_version"], 1);
  EXPECT_EQ(summary["exit_code"], code);
  EXPECT_EQ(summary["analyses"].size(), 6u);
  for (const auto& f : summary["files"]) EXPECT_TRUE(fs::exists(dir_ / "out" / f.get<std::string>())) << f;
}

TEST_F(Binary, ReportsDoNotDependOnTheThreadCount) {
  const std::string args = std::string("run --scenario ou_nelson --omega 1 ") + kSmall + " --min-count 50 --out-dir ";
  const int code = run(args + (dir_ / "a").string(), "ZITTERWALK_THREADS=1");
  ASSERT_TRUE(code == 0 || code == 1) << read(dir_ / "stderr.txt");
  ASSERT_EQ(run(args + (dir_ / "b").string(), "ZITTERWALK_THREADS=3"), code);
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    const auto name = entry.path().filename();
    if (name.extension() == ".json") {
      auto a = read_json(entry.path());
      auto b = read_json(dir_ / "b" / name);
      a.erase("generated_at");
      b.erase("generated_at");
      EXPECT_EQ(a, b) << name;
    } else {
      EXPECT_EQ(read(entry.path()), read(dir_ / "b" / name)) << name;
    }
  }
}

TEST_F(Binary, SimulateThenAnalyze) {
  const auto out = dir_ / "sim";
  ASSERT_EQ(run("simulate --n-steps 4096 --n-paths 50 --record-stride 1 --out-dir " + out.string()), 0)
      << read(dir_ / "stderr.txt");
  EXPECT_EQ(read_json(out / "simulation.json")["dense"], true);
  ASSERT_EQ(run("analyze --input " + (out / "ensemble.zwlk").string() +
                    " --analyses heisenberg,fractal --out-dir " + (dir_ / "ana").string()),
            0)
      << read(dir_ / "stderr.txt");
  const auto summary = read_json(dir_ / "ana" / "summary.json");
  EXPECT_EQ(summary["simulation"]["n_paths"], 50);
  EXPECT_EQ(summary["analyses"]["fractal"]["pass"], true);

  // a thinned file cannot support per-step analyses
  ASSERT_EQ(run("simulate --n-steps 4096 --n-paths 50 --out-dir " + (dir_ / "thin").string()), 0);
  EXPECT_EQ(run("analyze --input " + (dir_ / "thin" / "ensemble.zwlk").string() +
                " --analyses heisenberg --out-dir " + (dir_ / "ana2").string()),
            2);
}

TEST_F(Binary, EnsembleCsv) {
  ASSERT_EQ(run("run --analyses heisenberg --n-steps 100 --n-paths 3 --ensemble-output csv --record-stride 10 "
                "--out-dir " + (dir_ / "out").string()),
            0);
  const auto text = read(dir_ / "out" / "ensemble.csv");
  EXPECT_EQ(text.substr(0, 12), "path_id,t,x\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 11);
}

TEST_F(Binary, NoiseCheck) {
  EXPECT_EQ(run("noise-check --seed 7 --n 100000 --out " + (dir_ / "noise.json").string()), 0);
  const auto doc = read_json(dir_ / "noise.json");
  EXPECT_EQ(doc["pass"], true);
  EXPECT_EQ(doc["report"]["n"], 100000);
  EXPECT_EQ(run("noise-check --n 10"), 2);
}

}  // namespace
}  // namespace zitterwalk::cli
