#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ccpt/cli/app.hpp"
#include "ccpt/cli/experiments.hpp"
#include "ccpt/sim/map_io.hpp"
#include "json.hpp"
#include "tempdir.hpp"

using namespace ccpt;
using ccpt::testing::TempDir;

namespace {

std::string data_path(const std::string& rel) { return std::string(CCPT_DATA_DIR) + "/" + rel; }
std::string config_path(const std::string& name) { return std::string(CCPT_CONFIG_DIR) + "/" + name; }

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> small_train(const std::string& dir) {
  return {"train",      "--config",           config_path("quickstart.json"), "--seed", "7", "--workers", "1",
          "--deterministic", "--out",         dir,
          "--set",      "iterations=2",       "rollouts=3",  "episode_length=24", "eval.episodes=1",
          "ppo.minibatch=32"};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(Cli, UsageErrorsAreValidationFailures) {
  EXPECT_EQ(run({}).code, cli::kExitValidation);
  EXPECT_EQ(run({"no-such-command"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"train"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"train", "--config", config_path("quickstart.json"), "--profile", "huge"}).code,
            cli::kExitValidation);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, MissingMapIsValidationError) {
  TempDir tmp;
  const Result r = run({"train", "--config", config_path("quickstart.json"), "--set", "map=\"missing.json\"", "--out",
                        (tmp / "run").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("map"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(tmp / "run"));
}

TEST(Cli, TrainTwiceGivesIdenticalArtifactsAndNeverOverwrites) {
  TempDir tmp;
  const auto a = (tmp / "a").string();
  const auto b = (tmp / "b").string();
  ASSERT_EQ(run(small_train(a)).code, cli::kExitOk);
  ASSERT_EQ(run(small_train(b)).code, cli::kExitOk);
  EXPECT_EQ(read_file(tmp / "a" / "G.jsonl"), read_file(tmp / "b" / "G.jsonl"));
  auto ma = nlohmann::json::parse(read_file(tmp / "a" / "manifest.json"));
  auto mb = nlohmann::json::parse(read_file(tmp / "b" / "manifest.json"));
  EXPECT_EQ(ma["seed"], 7);
  ma.erase("timing");
  mb.erase("timing");
  EXPECT_EQ(ma, mb);

  const std::string before = read_file(tmp / "a" / "G.jsonl");
  EXPECT_EQ(run(small_train(a)).code, cli::kExitValidation);
  EXPECT_EQ(read_file(tmp / "a" / "G.jsonl"), before);

  // Triage is a pure function of the run directory.
  const Result t1 = run({"triage", a});
  const Result t2 = run({"triage", a});
  ASSERT_EQ(t1.code, cli::kExitOk) << t1.err;
  EXPECT_EQ(t1.out, t2.out);
  const Result t3 = run({"triage", b});
  EXPECT_EQ(t1.out, t3.out);

  // Absolute epsilon 0 keeps a superset of the quantile selection.
  const auto q = nlohmann::json::parse(t1.out);
  const auto abs = nlohmann::json::parse(run({"triage", a, "--mode", "absolute", "--epsilon", "0.0"}).out);
  ASSERT_GT(q["epsilon"].get<double>(), 0.0);
  std::set<std::uint64_t> abs_ids;
  for (const auto& s : abs["theta"]) abs_ids.insert(s["id"].get<std::uint64_t>());
  for (const auto& s : q["theta"]) EXPECT_TRUE(abs_ids.count(s["id"].get<std::uint64_t>()));

  EXPECT_EQ(run({"report", a}).code, cli::kExitOk);
  const auto exported = tmp / "all.txt";
  const Result e = run({"export", a, "--which", "all", "--demos", "--out", exported.string()});
  ASSERT_EQ(e.code, cli::kExitOk) << e.err;
  const auto recs = triage::parse_export(read_file(exported));
  EXPECT_EQ(recs.size(), 6u + 6u);
  EXPECT_EQ(recs.back().tag, "demo");
}

TEST(Cli, TriageOnIncompleteDirectoryIsRuntimeError) {
  TempDir tmp;
  std::filesystem::create_directories(tmp / "empty");
  EXPECT_EQ(run({"triage", (tmp / "empty").string()}).code, cli::kExitRuntime);
}

TEST(Cli, DemoRecordThenVerify) {
  TempDir tmp;
  const auto map = data_path("maps/testmap_area1.json");
  const auto demo = (tmp / "demo.txt").string();
  const Result r = run({"demo-record", "--map", map, "--via", "5,1,4", "--out", demo});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const Result v = run({"demo-verify", "--map", map, demo});
  EXPECT_EQ(v.code, cli::kExitOk);
  EXPECT_NE(v.out.find("ok"), std::string::npos);
  EXPECT_EQ(run({"demo-record", "--map", map, "--out", demo}).code, cli::kExitValidation);
  EXPECT_EQ(run({"demo-record", "--map", map, "--via", "5,1", "--out", (tmp / "x.txt").string()}).code,
            cli::kExitValidation);

  const auto bad = (tmp / "bad.txt").string();
  std::ofstream(bad) << "format_version 1\nmap testmap_area1\ngoal 0\nactions:\nnoop\n";
  EXPECT_EQ(run({"demo-verify", "--map", map, bad}).code, cli::kExitValidation);
}

TEST(Experiments, SpecsCoverEveryRowAndSeries) {
  const auto base = trainer::load_config(config_path("quickstart.json"));
  const auto reward = cli::reward_ablation_specs(base);
  ASSERT_EQ(reward.size(), 4u);
  EXPECT_EQ(reward[0].label, "CCPT");
  EXPECT_EQ(reward[1].label, "Linear Combination");
  EXPECT_EQ(reward[2].label, "Only Imitation");
  EXPECT_EQ(reward[3].label, "Only Curiosity");
  EXPECT_EQ(reward[1].cfg.alpha_value, 0.5);
  EXPECT_EQ(reward[2].cfg.alpha_value, 0.0);
  EXPECT_EQ(reward[3].cfg.alpha_value, 1.0);
  for (const auto& s : reward) EXPECT_EQ(s.cfg.seed, base.seed);
  const auto enc = cli::encoding_ablation_specs(base);
  ASSERT_EQ(enc.size(), 5u);
  // The full model shares its run with CCPT.
  EXPECT_EQ(enc[0].slug, reward[0].slug);
  EXPECT_EQ(trainer::config_hash(enc[0].cfg), trainer::config_hash(reward[0].cfg));
}

TEST(Experiments, EncodingAblationEmitsFiveMonotoneSeries) {
  TempDir tmp;
  const auto base = trainer::load_config(
      config_path("quickstart.json"),
      {"iterations=2", "rollouts=2", "episode_length=16", "eval.episodes=0", "ppo.minibatch=16"});
  const auto series = cli::ablate_encoding(base, tmp.path());
  ASSERT_EQ(series.size(), 5u);
  for (const auto& s : series) {
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_LT(s.points[0].env_steps, s.points[1].env_steps);
    EXPECT_LE(s.points[0].coverage, s.points[1].coverage);
  }
  // Reruns reuse the finished runs.
  const auto again = cli::ablate_encoding(base, tmp.path());
  EXPECT_EQ(cli::format_series(again), cli::format_series(series));
  // A different config never reuses or overwrites them.
  auto other = base;
  other.seed += 1;
  EXPECT_THROW(cli::ablate_encoding(other, tmp.path()), ConfigError);
}
