#include <gtest/gtest.h>

#include <boost/iostreams/copy.hpp>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>

#include <sstream>

#include "support.hpp"
#include "wikicite/dump_ingest.hpp"

using namespace wikicite;
namespace io = boost::iostreams;

namespace {

std::string page_xml(int id, const std::string& title, int ns, const std::string& text, bool redirect = false) {
  std::string r = "<page><title>" + title + "</title><ns>" + std::to_string(ns) + "</ns><id>" + std::to_string(id) + "</id>";
  if (redirect) r += "<redirect title=\"Elsewhere\" />";
  r += "<revision><id>" + std::to_string(id * 10) + "</id><text xml:space=\"preserve\">" + text + "</text></revision></page>";
  return r;
}

std::string dump(const std::vector<std::string>& pages) {
  std::string d = "<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\"><siteinfo><sitename>t</sitename></siteinfo>";
  for (const auto& p : pages) d += p;
  return d + "</mediawiki>";
}

std::vector<WikiPage> read_all(const std::string& xml, Compression c = Compression::kAuto, std::size_t chunk = 1 << 16) {
  std::istringstream in(xml);
  PageStream s(DumpSource::from_stream(in, c), chunk);
  std::vector<WikiPage> out;
  while (auto p = s.next()) out.push_back(std::move(*p));
  return out;
}

template <typename Filter>
std::string compress(const std::string& raw) {
  std::ostringstream out;
  {
    io::filtering_ostream f;
    f.push(Filter());
    f.push(out);
    f << raw;
  }
  return out.str();
}

}  // namespace

TEST(PageStream, ThreePagesComeBackInOrder) {
  const auto pages = read_all(dump({page_xml(1, "A", 0, "a"), page_xml(2, "B", 0, "b"), page_xml(3, "C", 1, "c")}));
  ASSERT_EQ(pages.size(), 3u);
  EXPECT_EQ(pages[0].page_id, 1);
  EXPECT_EQ(pages[1].title, "B");
  EXPECT_EQ(pages[2].ns, 1);
  EXPECT_EQ(pages[2].wikitext, "c");
}

TEST(PageStream, EmptyBodyYieldsNothing) {
  EXPECT_TRUE(read_all("<mediawiki></mediawiki>").empty());
}

TEST(PageStream, EntitiesAndMultibyteTextSurviveTinyChunks) {
  const std::string text = "&lt;ref&gt;{{cite web|title=Zürich &amp; Łódź}}&lt;/ref&gt;";
  const auto pages = read_all(dump({page_xml(5, "Ü", 0, text)}), Compression::kAuto, 7);
  ASSERT_EQ(pages.size(), 1u);
  EXPECT_EQ(pages[0].wikitext, "<ref>{{cite web|title=Zürich & Łódź}}</ref>");
  EXPECT_EQ(pages[0].title, "Ü");
}

TEST(PageStream, RedirectsAreFlaggedByElementOrDirective) {
  const auto pages = read_all(dump({page_xml(1, "A", 0, "x", true), page_xml(2, "B", 0, " #REDIRECT [[C]]"),
                                    page_xml(3, "C", 0, "body")}));
  ASSERT_EQ(pages.size(), 3u);
  EXPECT_TRUE(pages[0].is_redirect);
  EXPECT_TRUE(pages[1].is_redirect);
  EXPECT_FALSE(pages[2].is_redirect);
}

TEST(PageStream, GzipAndBzip2AreSniffed) {
  const auto raw = dump({page_xml(1, "A", 0, "alpha"), page_xml(2, "B", 0, "beta")});
  for (const auto& packed : {compress<io::gzip_compressor>(raw), compress<io::bzip2_compressor>(raw)}) {
    const auto pages = read_all(packed);
    ASSERT_EQ(pages.size(), 2u);
    EXPECT_EQ(pages[1].wikitext, "beta");
  }
}

TEST(PageStream, TruncatedInputFailsAfterCompletePages) {
  auto xml = dump({page_xml(1, "A", 0, "a"), page_xml(2, "B", 0, "b")});
  xml.resize(xml.find("<page><title>B") + 20);
  std::istringstream in(xml);
  PageStream s(DumpSource::from_stream(in));
  auto first = s.next();
  ASSERT_TRUE(first);
  EXPECT_EQ(first->page_id, 1);
  EXPECT_THROW(s.next(), DumpError);
}

TEST(PageStream, MalformedXmlReportsAnOffset) {
  std::istringstream in("<mediawiki><page><title>A</titl></page></mediawiki>");
  PageStream s(DumpSource::from_stream(in));
  try {
    s.next();
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    EXPECT_GT(e.byte_offset(), 0u);
  }
}

TEST(PageStream, MissingFileIsAUserError) {
  EXPECT_THROW(PageStream(DumpSource::file("/nonexistent/dump.xml")), UserError);
}

TEST(PageStream, BufferingStaysNearOnePage) {
  std::vector<std::string> pages;
  for (int i = 0; i < 200; ++i) pages.push_back(page_xml(i + 1, "P" + std::to_string(i), 0, std::string(2000, 'x')));
  std::istringstream in(dump(pages));
  PageStream s(DumpSource::from_stream(in), 4096);
  std::size_t n = 0;
  while (s.next()) ++n;
  EXPECT_EQ(n, 200u);
  EXPECT_LT(s.peak_buffered_bytes(), 20000u);
}

TEST(PageStream, FixtureDumpPageIdsMatchTheEnumeratedList) {
  PageStream s(DumpSource::file(testutil::fixture("parser/dump.xml")));
  std::vector<std::int64_t> ids;
  while (auto p = s.next()) ids.push_back(p->page_id);
  std::vector<std::int64_t> want;
  for (std::int64_t i = 1000; i < 1050; ++i) want.push_back(i);
  EXPECT_EQ(ids, want);
}

TEST(Citable, OnlyMainNamespaceNonRedirects) {
  WikiPage p;
  p.ns = 0;
  EXPECT_TRUE(is_citable_article(p));
  p.is_redirect = true;
  EXPECT_FALSE(is_citable_article(p));
  p.is_redirect = false;
  p.ns = 14;
  EXPECT_FALSE(is_citable_article(p));
}

TEST(Citable, RedirectDirective) {
  EXPECT_TRUE(has_redirect_directive("#redirect [[X]]"));
  EXPECT_TRUE(has_redirect_directive("  #REDIRECT[[X]]"));
  EXPECT_FALSE(has_redirect_directive("See #redirect"));
}
