#include <gtest/gtest.h>

#include "support.hpp"
#include "wikicite/common.hpp"
#include "wikicite/pos_tagger.hpp"

using namespace wikicite;

namespace {
const RuleTagger& shipped() {
  static const RuleTagger t = RuleTagger::load(testutil::data("pos"));
  return t;
}
}  // namespace

TEST(RuleTagger, HandTaggedSentence) {
  EXPECT_EQ(shipped().tag({"The", "city", "was", "founded"}), (std::vector<std::string>{"DT", "NN", "VBD", "VBN"}));
}

TEST(RuleTagger, EmptyInput) { EXPECT_TRUE(shipped().tag({}).empty()); }

TEST(RuleTagger, NumeralWithTrailingPeriod) { EXPECT_EQ(shipped().tag({"1204."}), (std::vector<std::string>{"CD"})); }

TEST(RuleTagger, UnknownWordsFallBackOnShape) {
  const auto tags = shipped().tag({"Zyxqwert", "blorfing", "grumbles", "3.5"});
  ASSERT_EQ(tags.size(), 4u);
  EXPECT_EQ(tags[0], "NNP");
  EXPECT_EQ(tags[1], "VBG");
  EXPECT_EQ(tags[3], "CD");
  EXPECT_GT(shipped().lexicon_size(), 1000u);
}

TEST(RuleTagger, TaggingFormDropsEdgePunctuation) {
  EXPECT_EQ(tagging_form("\"founded,"), "founded");
  EXPECT_EQ(tagging_form("(1204)."), "1204");
  EXPECT_EQ(tagging_form("..."), "...");
}

TEST(RuleTagger, SmallRuleSetFromStrings) {
  const auto t = RuleTagger::from_strings("the DT\nrun NN VB\n", "", "NN VB PREVTAG TO\n");
  EXPECT_EQ(t.tag({"the", "run"}), (std::vector<std::string>{"DT", "NN"}));
}

TEST(Perceptron, LearnsATinyCorpusAndRoundTrips) {
  std::vector<PerceptronTagger::Sentence> data;
  for (int i = 0; i < 30; ++i) {
    data.push_back({{"the", "DT"}, {"dog", "NN"}, {"runs", "VBZ"}});
    data.push_back({{"a", "DT"}, {"cat", "NN"}, {"sleeps", "VBZ"}});
  }
  PerceptronTagger t;
  t.train(data, 5, 1);
  EXPECT_EQ(t.tag({"the", "cat", "runs"}), (std::vector<std::string>{"DT", "NN", "VBZ"}));
  testutil::TempDir dir;
  t.save(dir / "w.json");
  const auto back = PerceptronTagger::load(dir / "w.json");
  EXPECT_EQ(back.tag({"a", "dog", "sleeps"}), t.tag({"a", "dog", "sleeps"}));
}

TEST(Factory, KnownKindsOnly) {
  EXPECT_EQ(make_tagger("rule", testutil::data("pos"))->name(), "rule");
  EXPECT_THROW(make_tagger("hmm", testutil::data("pos")), UserError);
}
