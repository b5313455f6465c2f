#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wikicite/classifier.hpp"

using namespace wikicite;

namespace {

const RuleTagger& tagger() {
  static const RuleTagger t = RuleTagger::load(testutil::data("pos"));
  return t;
}

ModelConfig small() {
  ModelConfig c;
  c.char_embed_dim = 6;
  c.token_embed_dim = 6;
  c.statement_encoder_dim = 4;
  c.hidden_layers = {8, 8, 6, 4};
  return c;
}

Vocabulary vocab() {
  CitationRecord r;
  r.preceding_words = {"alpha", "beta"};
  r.citation.title = "abc";
  r.section_path = "LEAD";
  VocabConfig cfg;
  cfg.min_count = 1;
  cfg.pos_top = 5;
  cfg.sections_top = 3;
  return build_vocabulary({r}, tagger(), cfg);
}

FeatureVector fv_of(const Vocabulary& v, std::vector<std::string> words, std::string title) {
  CitationRecord r;
  r.preceding_words = std::move(words);
  r.citation.title = std::move(title);
  r.section_path = "LEAD";
  return featurize(r, v, tagger());
}

}  // namespace

TEST(Config, HiddenLayersMustBeFour) {
  auto c = small();
  c.hidden_layers = {8, 8, 8};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(init_model(c, vocab(), 1), ConfigError);
  TrainConfig t;
  t.epochs = 0;
  EXPECT_FALSE(t.violations().empty());
}

TEST(Init, SeedDeterminism) {
  const auto v = vocab();
  EXPECT_TRUE(init_model(small(), v, 5) == init_model(small(), v, 5));
  EXPECT_FALSE(init_model(small(), v, 5) == init_model(small(), v, 6));
}

TEST(Forward, ProbabilitiesSumToOneForBothEncoders) {
  const auto v = vocab();
  for (auto enc : {EncoderKind::kPooled, EncoderKind::kRecurrent}) {
    auto c = small();
    c.encoder = enc;
    const auto p = init_model(c, v, 3);
    for (const auto& fv : {fv_of(v, {"alpha"}, "abc"), fv_of(v, {}, ""), fv_of(v, {"zzz", "beta"}, "cab")}) {
      const auto pr = forward(p, fv);
      EXPECT_NEAR(pr.probs[0] + pr.probs[1] + pr.probs[2], 1.0, 1e-6);
    }
  }
}

TEST(Forward, EmptyCitationTextGivesZeroCharPath) {
  const auto p = init_model(small(), vocab(), 3);
  EXPECT_TRUE(char_representation(p, {}).isZero());
  const auto rep = char_representation(p, {2, 3, 2});
  EXPECT_NEAR(rep.lpNorm<1>(), 1.0, 1e-12);
}

TEST(Forward, HandComputedOutputLayer) {
  // With every weight zeroed, the logits are the last bias, (1, 2, 3).
  auto p = init_model(small(), vocab(), 3);
  for (auto& d : p.dense) d.value.setZero();
  p.get("mlp.b4") << 1.0, 2.0, 3.0;
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const auto pr = forward(p, fv_of(vocab(), {"alpha"}, "abc"));
  EXPECT_NEAR(pr.probs[0], std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(pr.probs[1], std::exp(2.0) / z, 1e-12);
  EXPECT_NEAR(pr.probs[2], std::exp(3.0) / z, 1e-12);
  EXPECT_EQ(pr.label, ClassLabel::kWeb);
}

TEST(Loss, UniformPredictionCostsLnThree) {
  auto p = init_model(small(), vocab(), 3);
  for (auto& d : p.dense) d.value.setZero();
  std::vector<Example> batch = {{fv_of(vocab(), {"alpha"}, "abc"), ClassLabel::kJournal}};
  EXPECT_NEAR(loss_and_grad(p, batch, nullptr), std::log(3.0), 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionCostsNearlyNothing) {
  auto p = init_model(small(), vocab(), 3);
  for (auto& d : p.dense) d.value.setZero();
  p.get("mlp.b4") << 60.0, 0.0, 0.0;
  std::vector<Example> batch = {{fv_of(vocab(), {}, ""), ClassLabel::kBook}};
  EXPECT_NEAR(loss_and_grad(p, batch, nullptr), 0.0, 1e-12);
}

TEST(Split, NinetyTenOfAThousand) {
  std::vector<ClassLabel> labels;
  for (int i = 0; i < 1000; ++i) labels.push_back(kAllClasses[static_cast<std::size_t>(i % 7 < 3 ? 0 : i % 7 < 5 ? 1 : 2)]);
  const auto s = stratified_split(labels, 0.1, 42);
  EXPECT_EQ(s.test.size(), 100u);
  EXPECT_EQ(s.train.size(), 900u);
  std::array<int, 3> all{}, test{};
  for (auto l : labels) ++all[static_cast<std::size_t>(l)];
  for (auto i : s.test) ++test[static_cast<std::size_t>(labels[i])];
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(test[k] * 10 - all[k]), 10);
  EXPECT_EQ(s.test, stratified_split(labels, 0.1, 42).test);
}

TEST(Evaluate, PerfectPredictorIsDiagonal) {
  const std::vector<ClassLabel> t = {ClassLabel::kBook, ClassLabel::kWeb, ClassLabel::kWeb, ClassLabel::kJournal};
  const auto e = evaluate_predictions(t, t);
  EXPECT_DOUBLE_EQ(e.accuracy, 1.0);
  EXPECT_EQ(e.confusion[2][2], 2u);
  EXPECT_EQ(e.confusion[0][2], 0u);
  const auto m = evaluate_predictions(t, {ClassLabel::kWeb, ClassLabel::kWeb, ClassLabel::kBook, ClassLabel::kJournal});
  EXPECT_EQ(m.confusion[0][2] + m.confusion[0][0], 1u);
  EXPECT_DOUBLE_EQ(m.recall[2], 0.5);
  EXPECT_TRUE(predict_batch(init_model(small(), vocab(), 1), {}).empty());
}

TEST(Checkpoint, RoundTripsBitwise) {
  auto p = init_model(small(), vocab(), 9);
  p.tokens.mutable_row(3)(0) = 0.5;
  testutil::TempDir dir;
  save_checkpoint(p, dir / "m.bin");
  EXPECT_TRUE(load_checkpoint(dir / "m.bin") == p);
}

TEST(WordVectors, ImportsRowsForKnownWords) {
  const auto v = vocab();
  auto p = init_model(small(), v, 1);
  testutil::TempDir dir;
  {
    std::ofstream out(dir / "vec.txt");
    out << "3 6\nalpha 1 2 3 4 5 6\nunknownword 1 1 1 1 1 1\nbeta 0 0 0 0 0 1\n";
  }
  EXPECT_EQ(import_word_vectors(p, v, dir / "vec.txt"), 2u);
  EXPECT_DOUBLE_EQ(p.tokens.row(v.token_id("alpha"))(5), 6.0);
}
