#include <gtest/gtest.h>

#include "wikicite/labels.hpp"

using namespace wikicite;

namespace {

UniformCitation with_id(IdKind k, const std::string& v, const std::string& type = "cite web") {
  UniformCitation c;
  c.type = type;
  c.title = "t";
  c.id_list[k] = v;
  return c;
}

std::vector<LabeledCitation> pool(std::size_t per_class) {
  std::vector<LabeledCitation> out;
  for (auto cls : kAllClasses)
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledCitation l;
      l.label = cls;
      l.record.order_index = static_cast<int>(i);
      l.record.citation.title = std::string(to_string(cls)) + std::to_string(i);
      out.push_back(l);
    }
  return out;
}

}  // namespace

TEST(Rules, PmidOnlyIsJournal) {
  EXPECT_EQ(assign_label(with_id(IdKind::kPmid, "41417")), ClassLabel::kJournal);
}

TEST(Rules, IsbnOnlyIsBook) { EXPECT_EQ(assign_label(with_id(IdKind::kIsbn, "0306406152")), ClassLabel::kBook); }

TEST(Rules, GuardianUrlIsWeb) {
  UniformCitation c;
  c.type = "cite news";
  c.url_top_level_domain = "theguardian";
  EXPECT_EQ(assign_label(c), ClassLabel::kWeb);
  EXPECT_EQ(matching_rule(c), LabelRule::kNewsDomain);
}

TEST(Rules, DoiNeedsAJournalTemplate) {
  EXPECT_EQ(assign_label(with_id(IdKind::kDoi, "10.1/x", "cite journal")), ClassLabel::kJournal);
  EXPECT_EQ(assign_label(with_id(IdKind::kDoi, "10.1/x", "cite conference")), ClassLabel::kJournal);
  EXPECT_FALSE(assign_label(with_id(IdKind::kDoi, "10.1/x", "cite web")));
  auto c = with_id(IdKind::kDoi, "10.1/x", "citation");
  EXPECT_FALSE(assign_label(c));
  c.periodical = "Nature";
  EXPECT_EQ(assign_label(c), ClassLabel::kJournal);
}

TEST(Rules, PrecedenceFollowsRuleOrder) {
  auto c = with_id(IdKind::kIsbn, "0306406152");
  c.id_list[IdKind::kPmid] = "1";
  EXPECT_EQ(matching_rule(c), LabelRule::kPmcOrPmid);
  auto w = with_id(IdKind::kIsbn, "0306406152");
  w.url_top_level_domain = "youtube";
  EXPECT_EQ(assign_label(w), ClassLabel::kBook);
}

TEST(Rules, UnknownDomainIsUnlabeled) {
  UniformCitation c;
  c.url_top_level_domain = "example";
  EXPECT_EQ(matching_rule(c), LabelRule::kNone);
  EXPECT_FALSE(assign_label(c));
}

TEST(Leakage, IdentifiersAndTypeGoPeriodicalStays) {
  auto c = with_id(IdKind::kDoi, "10.1/x", "cite journal");
  c.periodical = "Nature";
  c.url = "http://a";
  c.work = "w";
  const auto s = strip_leakage(c);
  EXPECT_TRUE(s.id_list.empty());
  EXPECT_TRUE(s.type.empty());
  EXPECT_TRUE(s.url.empty());
  EXPECT_EQ(s.periodical, "Nature");
  EXPECT_TRUE(is_leakage_free(s));
  EXPECT_FALSE(is_leakage_free(c));
}

TEST(Leakage, StrippingIsIdempotent) {
  auto c = with_id(IdKind::kIsbn, "0306406152", "cite book");
  const auto once = strip_leakage(c);
  EXPECT_EQ(strip_leakage(once), once);
}

TEST(Leakage, OnlyLeakingFieldsLeavesALowInformationRecord) {
  UniformCitation c;
  c.type = "cite web";
  c.url = "http://bbc.com";
  c.url_top_level_domain = "bbc";
  const auto s = strip_leakage(c);
  EXPECT_EQ(s, UniformCitation{});
  EXPECT_TRUE(is_low_information(s));
}

TEST(Sampling, TenPerClass) {
  const auto out = build_training_set(pool(100), {{ClassLabel::kBook, 10}, {ClassLabel::kJournal, 10}, {ClassLabel::kWeb, 10}}, 3);
  ASSERT_EQ(out.size(), 30u);
  std::map<ClassLabel, int> n;
  for (const auto& l : out) ++n[l.label];
  for (auto cls : kAllClasses) EXPECT_EQ(n[cls], 10);
}

TEST(Sampling, SameSeedSameSampleDifferentSeedDiffers) {
  const SampleTargets t = {{ClassLabel::kBook, 20}, {ClassLabel::kWeb, 5}};
  EXPECT_EQ(build_training_set(pool(50), t, 1), build_training_set(pool(50), t, 1));
  EXPECT_NE(build_training_set(pool(50), t, 1), build_training_set(pool(50), t, 2));
  // JOURNAL has no target and is taken whole.
  std::size_t journals = 0;
  for (const auto& l : build_training_set(pool(50), t, 1)) journals += l.label == ClassLabel::kJournal;
  EXPECT_EQ(journals, 50u);
}

TEST(Sampling, TargetsParse) {
  const auto t = parse_targets("book=951991, web=1100000,journal=748009");
  EXPECT_EQ(t.at(ClassLabel::kBook), 951991u);
  EXPECT_EQ(t.at(ClassLabel::kWeb), 1100000u);
  EXPECT_EQ(t.at(ClassLabel::kJournal), 748009u);
  EXPECT_THROW(parse_targets("novel=3"), UserError);
  EXPECT_THROW(parse_targets("book=-1"), UserError);
}

TEST(Corpus, LabelCorpusSplitsAndStrips) {
  std::vector<CitationRecord> records(3);
  records[0].citation = with_id(IdKind::kIsbn, "0306406152", "cite book");
  records[0].template_text = "{{cite book|isbn=0306406152}}";
  records[1].citation.title = "nothing fires";
  records[2].citation.type = "cite web";
  records[2].citation.url_top_level_domain = "bbc";
  const auto out = label_corpus(records, {}, 1);
  ASSERT_EQ(out.train.size(), 1u);
  EXPECT_EQ(out.train[0].label, ClassLabel::kBook);
  EXPECT_TRUE(out.train[0].record.template_text.empty());
  EXPECT_TRUE(is_leakage_free(out.train[0].record.citation));
  ASSERT_EQ(out.unlabeled.size(), 1u);
  EXPECT_EQ(out.unlabeled[0].citation.title, "nothing fires");
  EXPECT_EQ(out.low_information, 1u);
  EXPECT_EQ(out.by_rule.at("isbn"), 1u);
}

TEST(Json, LabeledRoundTrip) {
  LabeledCitation l;
  l.label = ClassLabel::kWeb;
  l.record.citation.title = "x";
  EXPECT_EQ(labeled_from_json(nlohmann::json::parse(to_json(l).dump())), l);
  EXPECT_EQ(parse_class_label("journal"), ClassLabel::kJournal);
  EXPECT_FALSE(parse_class_label("video"));
}
