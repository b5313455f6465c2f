#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "wikicite/pipeline.hpp"

using namespace wikicite;

namespace {

PipelineConfig e2e(const testutil::TempDir& dir) {
  auto c = load_config(testutil::fixture("e2e/pipeline.yaml"));
  c.out_dir = dir / "out";
  return c;
}

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& v : e.violations())
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, EmptyConfigIsAllDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(c.vocab.max_statement_words, 40u);
  EXPECT_EQ(c.vocab.pos_top, 35u);
  EXPECT_EQ(c.vocab.sections_top, 150u);
  EXPECT_EQ(c.train.epochs, 5);
  EXPECT_DOUBLE_EQ(c.lookup.score_threshold, 34.997);
  EXPECT_EQ(c.lookup.max_rps, 50);
  EXPECT_EQ(c.model.hidden_layers.size(), 4u);
}

TEST(Config, EpochsZeroIsAViolation) {
  try {
    parse_config("train:\n  epochs: 0\n");
    FAIL() << "accepted epochs: 0";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "epochs must be >= 1"));
  }
}

TEST(Config, AllViolationsReportedTogether) {
  try {
    parse_config("colour: red\ntrain:\n  epochs: 0\n  speed: 3\nmodel:\n  encoder: transformer\n");
    FAIL() << "accepted a bad config";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "colour"));
    EXPECT_TRUE(mentions(e, "train.speed"));
    EXPECT_TRUE(mentions(e, "epochs"));
    EXPECT_TRUE(mentions(e, "transformer"));
    EXPECT_GE(e.violations().size(), 4u);
  }
}

TEST(Config, NotAMapping) { EXPECT_THROW(parse_config("- a\n- b\n"), ConfigError); }

TEST(Config, RelativePathsResolveAgainstTheConfigFile) {
  const auto c = load_config(testutil::fixture("e2e/pipeline.yaml"));
  EXPECT_TRUE(c.dump.is_absolute());
  EXPECT_TRUE(std::filesystem::exists(c.dump));
}

TEST(Stages, UnknownStage) {
  testutil::TempDir dir;
  EXPECT_THROW(run_stage("fold", e2e(dir)), UserError);
}

TEST(Stages, TrainWithoutLabelIsADependencyError) {
  testutil::TempDir dir;
  const auto c = e2e(dir);
  try {
    run_stage("train", c);
    FAIL() << "train ran without label outputs";
  } catch (const DependencyError& e) {
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Stages, RerunIsANoOp) {
  testutil::TempDir dir;
  const auto c = e2e(dir);
  const auto first = run_stage("extract", c);
  EXPECT_FALSE(first.skipped);
  const auto before = testutil::slurp(c.out_dir / "citations.jsonl");
  const auto again = run_stage("extract", c);
  EXPECT_TRUE(again.skipped);
  EXPECT_EQ(testutil::slurp(c.out_dir / "citations.jsonl"), before);
  EXPECT_TRUE(std::filesystem::exists(manifest_path(c, "extract")));
}

TEST(Stages, TamperedUpstreamOutputIsDetected) {
  testutil::TempDir dir;
  const auto c = e2e(dir);
  run_stage("extract", c);
  std::ofstream(c.out_dir / "citations.jsonl", std::ios::app) << "{}\n";
  EXPECT_THROW(run_stage("map", c), DependencyError);
}

TEST(Stages, FullRunWritesEveryStageManifest) {
  testutil::TempDir dir;
  const auto c = e2e(dir);
  const auto results = run_all(c);
  for (const auto& r : results) {
    EXPECT_FALSE(r.skipped) << r.stage;
    EXPECT_TRUE(std::filesystem::exists(manifest_path(c, r.stage))) << r.stage;
  }
  EXPECT_TRUE(std::filesystem::exists(c.out_dir / "report" / "summary.md"));
  for (const auto& r : run_all(c)) EXPECT_TRUE(r.skipped) << r.stage;
}
