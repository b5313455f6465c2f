#include <gtest/gtest.h>

#include "support.hpp"
#include "wikicite/wikicode.hpp"

using namespace wikicite;

namespace {

TemplateRegistry registry() { return TemplateRegistry::load(testutil::data("templates.txt")); }

WikiPage page(std::string text) {
  WikiPage p;
  p.page_id = 7;
  p.title = "T";
  p.wikitext = std::move(text);
  return p;
}

}  // namespace

TEST(Tokenize, AppendixExampleCall) {
  const std::string s = "{{citation|author=John Smith|accessdate=February 17, 2006}}";
  const auto calls = tokenize_templates(s);
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(calls[0].name, "citation");
  ASSERT_EQ(calls[0].named_params.size(), 2u);
  EXPECT_EQ(*calls[0].find("author"), "John Smith");
  EXPECT_EQ(*calls[0].find("accessdate"), "February 17, 2006");
  EXPECT_EQ(calls[0].source_span, (Span{0, s.size()}));
}

TEST(Tokenize, PlainTextHasNoCalls) { EXPECT_TRUE(tokenize_templates("no templates here").empty()); }

TEST(Tokenize, NestedTemplateStaysVerbatimInItsParameter) {
  const auto calls = tokenize_templates("{{cite book|title={{lang|fr|Les Mots}}|year=1964}}");
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(calls[0].name, "cite book");
  EXPECT_EQ(*calls[0].find("title"), "{{lang|fr|Les Mots}}");
  EXPECT_EQ(*calls[0].find("year"), "1964");
}

TEST(Tokenize, PositionalAndNamedParametersAndLinks) {
  const auto calls = tokenize_templates("x {{Lang|fr|[[Paris|la ville]]|italic=yes}} y");
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(calls[0].name, "lang");
  EXPECT_EQ(calls[0].positional_params, (std::vector<std::string>{"fr", "[[Paris|la ville]]"}));
  EXPECT_EQ(*calls[0].find("ITALIC"), "yes");
  EXPECT_EQ(calls[0].source_span.begin, 2u);
}

TEST(Tokenize, LastDuplicateParameterWins) {
  const auto calls = tokenize_templates("{{cite web|title=a|title=b}}");
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(*calls[0].find("title"), "b");
}

TEST(Tokenize, CommentsNowikiAndPreAreOpaque) {
  EXPECT_TRUE(tokenize_templates("<!-- {{cite web|title=x}} -->").empty());
  EXPECT_TRUE(tokenize_templates("<nowiki>{{cite web|title=x}}</nowiki>").empty());
  EXPECT_TRUE(tokenize_templates("<PRE>{{cite web|title=x}}</PRE>").empty());
  const auto calls = tokenize_templates("{{cite web|title=a<!-- }} -->b}}");
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(*calls[0].find("title"), "ab");
}

TEST(Tokenize, UnbalancedBracesAreText) {
  EXPECT_TRUE(tokenize_templates("{{cite web|title=never closed").empty());
  const auto calls = tokenize_templates("}} stray {{cite web|title=ok}} {{");
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(*calls[0].find("title"), "ok");
}

TEST(Tokenize, SpansAreOffsetByBase) {
  const auto calls = tokenize_templates("{{a}}", 100);
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_EQ(calls[0].source_span, (Span{100, 105}));
}

TEST(Names, NormalizationFoldsCaseUnderscoresAndPrefix) {
  EXPECT_EQ(normalize_template_name(" Template:Cite_Journal "), "cite journal");
  EXPECT_EQ(normalize_template_name("cite   web"), "cite web");
}

TEST(Serialize, CanonicalPrint) {
  const auto calls = tokenize_templates("{{ Cite web | url = http://x | a }}");
  ASSERT_EQ(calls.size(), 1u);
  // Positional values keep their whitespace; named ones are trimmed.
  EXPECT_EQ(calls[0].serialize(), "{{cite web| a |url=http://x}}");
  const auto again = parse_template_call(calls[0].serialize(), {0, 0});
  ASSERT_TRUE(again);
  EXPECT_TRUE(again->same_structure(calls[0]));
}

TEST(Registry, AliasesResolveToCanonicalClass) {
  const auto r = TemplateRegistry::parse("cite web\ncite journal # comment\ncite website = cite web\n");
  EXPECT_TRUE(r.contains("cite website"));
  EXPECT_EQ(r.canonical("cite website"), "cite web");
  EXPECT_EQ(r.canonical("cite journal"), "cite journal");
  EXPECT_FALSE(r.contains("infobox"));
  EXPECT_TRUE(registry().contains("cite av media"));
}

TEST(Context, CitationAtByteZeroHasNoContext) {
  const std::string t = "{{cite book|title=X}} after";
  const auto ctx = plain_text_context(t, {0, 21});
  EXPECT_TRUE(ctx.preceding_words.empty());
  EXPECT_EQ(ctx.section_path, "LEAD");
}

TEST(Context, HandStrippedSnippet) {
  const std::string t = "== History ==\nThe city was founded in 1204.{{cite book|title=X}}";
  const auto at = t.find("{{");
  const auto ctx = plain_text_context(t, {at, t.size()});
  EXPECT_EQ(ctx.preceding_words, (std::vector<std::string>{"The", "city", "was", "founded", "in", "1204."}));
  EXPECT_EQ(ctx.section_path, "History");
}

TEST(Context, TruncatesToFortyWords) {
  std::string t;
  for (int i = 0; i < 100; ++i) t += "w" + std::to_string(i) + " ";
  const auto at = t.size();
  t += "{{cite web|title=x}}";
  const auto ctx = plain_text_context(t, {at, t.size()});
  ASSERT_EQ(ctx.preceding_words.size(), 40u);
  EXPECT_EQ(ctx.preceding_words.front(), "w60");
  EXPECT_EQ(ctx.preceding_words.back(), "w99");
}

TEST(Context, MarkupIsStrippedToLabels) {
  const std::string t = "'''Bold''' [[Target|shown]] [[plain]] [https://x.org label] <b>tag</b>.{{cite web|title=x}}";
  const auto ctx = plain_text_context(t, {t.find("{{cite"), t.size()});
  EXPECT_EQ(ctx.preceding_words, (std::vector<std::string>{"Bold", "shown", "plain", "label", "tag."}));
}

TEST(Extract, SameBookTwiceIsCountedOnce) {
  const std::string t = "A.<ref>{{cite book|title=Same|isbn=9780306406157}}</ref> B.<ref>{{cite book|title=Same|isbn=9780306406157}}</ref>";
  ExtractStats stats;
  const auto got = extract_citations(page(t), registry(), kStatementWords, &stats);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(stats.duplicates_dropped, 1u);
}

TEST(Extract, PageWithoutTemplatesIsEmpty) { EXPECT_TRUE(extract_citations(page("Just prose."), registry()).empty()); }

TEST(Extract, NamedRefReuseKeepsTheFirstDefinition) {
  const std::string t = "A.<ref name=\"n\">{{cite web|title=One|url=http://a}}</ref> B.<ref name=\"n\" /> "
                        "C.<ref name=n>{{cite web|title=Two|url=http://b}}</ref>";
  ExtractStats stats;
  const auto got = extract_citations(page(t), registry(), kStatementWords, &stats);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(*got[0].call.find("title"), "One");
  EXPECT_EQ(stats.ref_reuse_dropped, 1u);
}

TEST(Extract, UnsupportedTemplatesAreIgnored) {
  const auto got = extract_citations(page("{{Infobox city|name=x}} Text.{{cite web|title=a|url=http://a}}"), registry());
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].call.name, "cite web");
}

TEST(Extract, SevenCitationsAcrossThreeSections) {
  std::string t = "Lead one.{{cite web|title=c0}} Lead two.{{cite web|title=c1}}\n"
                  "== Early ==\nE one.{{cite book|title=c2}} E two.{{cite book|title=c3}}\n"
                  "=== Detail ===\nD.{{cite news|title=c4}}\n"
                  "== Late ==\nL one.{{cite journal|title=c5}} L two.{{citation|title=c6}}\n";
  const auto got = extract_citations(page(t), registry());
  ASSERT_EQ(got.size(), 7u);
  const std::vector<std::string> sections = {"LEAD", "LEAD", "Early", "Early", "Detail", "Late", "Late"};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(got[i].order_index, static_cast<int>(i));
    EXPECT_EQ(got[i].section_path, sections[i]) << i;
    EXPECT_EQ(got[i].page_citation_count, 7u);
  }
  EXPECT_EQ(got[2].preceding_words.back(), "one.");
}

TEST(Extract, DedupKeyNeedsTitleIdOrUrl) {
  const auto a = parse_template_call("{{cite web|quote=x}}", {0, 0});
  ASSERT_TRUE(a);
  EXPECT_FALSE(citation_dedup_key(*a));
  const auto b = parse_template_call("{{cite web|title=X}}", {0, 0});
  EXPECT_TRUE(citation_dedup_key(*b));
}
