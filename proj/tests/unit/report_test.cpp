#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "wikicite/report.hpp"

using namespace wikicite;

namespace {

CorpusEntry entry(std::int64_t page, std::map<IdKind, std::string> ids, ClassLabel label = ClassLabel::kJournal,
                  std::string year = "", std::string periodical = "") {
  CorpusEntry e;
  e.record.page_id = page;
  e.record.citation.id_list = std::move(ids);
  e.record.citation.year = std::move(year);
  e.record.citation.periodical = std::move(periodical);
  e.label = label;
  return e;
}

ReportConfig small_range() {
  ReportConfig c;
  c.first_year = 2000;
  c.last_year = 2009;
  return c;
}

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& f : std::filesystem::directory_iterator(dir)) out[f.path().filename().string()] = testutil::slurp(f.path());
  return out;
}

}  // namespace

TEST(Smooth, WindowOneIsIdentity) {
  const std::vector<double> s = {3, 0, 7, 1, 9};
  EXPECT_EQ(smooth(s, 1), s);
  EXPECT_EQ(smooth(s, 1, true), s);
}

TEST(Smooth, ConstantSeriesIsUnchanged) {
  const std::vector<double> s(12, 4.0);
  for (std::size_t w : {2u, 3u, 4u, 7u, 20u}) EXPECT_EQ(smooth(s, w), s) << w;
}

TEST(Smooth, HandComputedWindows) {
  const std::vector<double> s = {4, 8, 0, 4, 10};
  // Window 4 centered covers [i-2, i+1].
  EXPECT_EQ(smooth(s, 4), (std::vector<double>{6, 4, 4, 5.5, 14.0 / 3}));
  // Window 2 trailing covers [i-1, i].
  EXPECT_EQ(smooth(s, 2, true), (std::vector<double>{4, 6, 4, 2, 7}));
  EXPECT_THROW(smooth(s, 0), std::invalid_argument);
}

TEST(Stats, EmptyCorpus) {
  const auto s = compute_stats({}, 0, small_range());
  EXPECT_EQ(s.citations_total, 0u);
  EXPECT_TRUE(s.cooccurrence.empty());
  EXPECT_TRUE(s.dois_per_page.empty());
  EXPECT_TRUE(top_journals(s, 5).empty());
  EXPECT_DOUBLE_EQ(s.share(0), 0.0);
}

TEST(Stats, SinglePageWithOneDoi) {
  const auto s = compute_stats({entry(1, {{IdKind::kDoi, "10.1/a"}})}, 0, small_range());
  EXPECT_EQ(s.pages_with_doi, 1u);
  EXPECT_DOUBLE_EQ(s.share(s.pages_with_doi), 1.0);
  EXPECT_EQ(s.cooccurrence.at(0b10000), 1u);
}

TEST(Stats, DistinctDoisPerPage) {
  const auto s = compute_stats({entry(1, {{IdKind::kDoi, "10.1/a"}}), entry(1, {{IdKind::kDoi, "10.1/a"}}),
                                entry(2, {{IdKind::kDoi, "10.1/a"}}), entry(2, {{IdKind::kDoi, "10.1/b"}}),
                                entry(3, {{IdKind::kIsbn, "0306406152"}})},
                               10, small_range());
  EXPECT_EQ(s.dois_per_page, (std::map<std::size_t, std::size_t>{{1, 1}, {2, 1}}));
  EXPECT_EQ(s.unique_dois, 2u);
  EXPECT_EQ(s.pages_with_isbn, 1u);
  EXPECT_DOUBLE_EQ(s.share(s.pages_with_doi), 0.2);
}

TEST(Stats, PatternsAndOtherIdentifiers) {
  const auto s = compute_stats({entry(1, {{IdKind::kIsbn, "1"}}), entry(1, {{IdKind::kOclc, "9"}}), entry(1, {}),
                                entry(1, {{IdKind::kDoi, "10.1/a"}, {IdKind::kPmid, "5"}})},
                               0, small_range());
  EXPECT_EQ(s.cooccurrence, (std::map<unsigned, std::size_t>{{0b01000, 1}, {0b10010, 1}}));
  EXPECT_EQ(s.other_ids_only, 1u);
  EXPECT_EQ(s.no_ids, 1u);
}

TEST(Stats, YearsAndJournals) {
  const auto s = compute_stats({entry(1, {}, ClassLabel::kJournal, "2003", "Nature"),
                                entry(1, {}, ClassLabel::kJournal, "2003", "nature "),
                                entry(1, {}, ClassLabel::kJournal, "1999", "Science"),
                                entry(1, {}, ClassLabel::kJournal, "", "Science"),
                                entry(1, {}, ClassLabel::kJournal, "2005", "Cell"),
                                entry(1, {}, ClassLabel::kBook, "2004", "Ignored")},
                               0, small_range());
  const auto& j = s.years[static_cast<std::size_t>(ClassLabel::kJournal)];
  EXPECT_EQ(j.counts.size(), 10u);
  EXPECT_EQ(j.counts[3], 2u);
  EXPECT_EQ(j.out_of_range, 1u);
  EXPECT_EQ(j.missing, 1u);
  const auto top = top_journals(s, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].key, "nature");
  EXPECT_EQ(top[0].citations, 2u);
  EXPECT_EQ(top[1].key, "science");
  EXPECT_EQ(s.journals.size(), 3u);
}

TEST(Stats, ChunkedCountingAgreesWithSerial) {
  std::vector<CorpusEntry> corpus;
  for (int i = 0; i < 5000; ++i)
    corpus.push_back(entry(i % 97, {{IdKind::kDoi, "10.1/" + std::to_string(i % 301)}}, ClassLabel::kJournal,
                           std::to_string(2000 + i % 10), i % 3 ? "A" : "B"));
  auto serial = small_range();
  serial.workers = 1;
  auto parallel = small_range();
  parallel.workers = 8;
  const auto a = compute_stats(corpus, 0, serial), b = compute_stats(corpus, 0, parallel);
  EXPECT_EQ(a.dois_per_page, b.dois_per_page);
  EXPECT_EQ(a.unique_dois, b.unique_dois);
  EXPECT_EQ(a.years[1].counts, b.years[1].counts);
  EXPECT_EQ(a.journals.size(), b.journals.size());
}

TEST(Emit, SameStatsSameBytes) {
  const auto s = compute_stats({entry(1, {{IdKind::kDoi, "10.1/a"}}, ClassLabel::kJournal, "2003", "Nature")}, 4,
                               small_range());
  testutil::TempDir a, b;
  const auto files = emit_report(s, small_range(), std::nullopt, a.path());
  emit_report(s, small_range(), std::nullopt, b.path());
  EXPECT_FALSE(files.empty());
  EXPECT_EQ(read_dir(a.path()), read_dir(b.path()));
}

TEST(Emit, EmptyStatsGiveASkeleton) {
  testutil::TempDir dir;
  const auto files = emit_report(CorpusStats{}, small_range(), std::nullopt, dir.path());
  EXPECT_NE(std::find(files.begin(), files.end(), "summary.md"), files.end());
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
}

TEST(Emit, UnwritableDestinationFails) {
  testutil::TempDir dir;
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_report(CorpusStats{}, small_range(), std::nullopt, dir / "file"), UserError);
}

TEST(Canvas, PngIsDeterministic) {
  testutil::TempDir dir;
  Canvas c(20, 10);
  c.fill_rect(2, 2, 8, 8, {255, 0, 0});
  c.line(0, 0, 19, 9, {0, 0, 255});
  c.write_png(dir / "a.png");
  c.write_png(dir / "b.png");
  const auto a = testutil::slurp(dir / "a.png");
  EXPECT_EQ(a.substr(1, 3), "PNG");
  EXPECT_EQ(a, testutil::slurp(dir / "b.png"));
}
