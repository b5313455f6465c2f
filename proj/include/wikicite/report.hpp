#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wikicite/crossref.hpp"
#include "wikicite/labels.hpp"
#include "wikicite/uniform.hpp"

namespace wikicite {

// One citation of the final corpus.
struct CorpusEntry {
  CitationRecord record;
  ClassLabel label = ClassLabel::kBook;
  bool known = false;   // labeled by rule rather than by the classifier
  std::string new_doi;  // found by lookup, empty otherwise
};

// Kinds in the presence pattern, bit 4 is DOI and bit 0 is ARXIV.
inline constexpr std::array<IdKind, 5> kPatternKinds = {IdKind::kDoi, IdKind::kIsbn, IdKind::kPmc, IdKind::kPmid,
                                                        IdKind::kArxiv};
unsigned presence_pattern(const UniformCitation& c);

struct YearHistogram {
  int first_year = 1500;
  int last_year = 2020;
  std::vector<std::size_t> counts;  // one bin per year in [first_year, last_year]
  std::size_t missing = 0;          // no parseable year
  std::size_t out_of_range = 0;
};

// Moving average over `window` bins. Centered windows cover [i - w/2, i + w - 1 - w/2];
// trailing ones cover [i - w + 1, i]. Bins past either edge are left out of the mean.
std::vector<double> smooth(const std::vector<double>& series, std::size_t window, bool trailing = false);

struct JournalCount {
  std::string name;  // most frequent spelling
  std::string key;   // folded name
  std::size_t citations = 0;
};

// Partial aggregate over any subset of the corpus. merge() is associative, so chunks can
// be counted independently and combined in order.
class StatsAccumulator {
public:
  StatsAccumulator(int first_year, int last_year);

  void add(const CorpusEntry& e);
  void merge(const StatsAccumulator& o);

  std::size_t citations = 0;
  std::map<IdKind, std::size_t> id_counts;
  std::map<unsigned, std::size_t> patterns;  // observed nonzero patterns
  std::size_t other_ids_only = 0;
  std::size_t no_ids = 0;
  std::array<std::size_t, kNumClasses> known{};
  std::array<std::size_t, kNumClasses> classified{};
  std::set<std::string> dois;
  std::set<std::string> isbns;
  std::set<std::string> new_dois;
  std::map<std::int64_t, std::set<std::string>> page_dois;
  std::set<std::int64_t> pages;
  std::set<std::int64_t> pages_with_isbn;
  std::array<YearHistogram, kNumClasses> years;
  std::map<std::string, std::map<std::string, std::size_t>> journals;  // folded -> spelling -> count
};

struct CorpusStats {
  std::size_t citations_total = 0;
  std::size_t pages_total = 0;
  std::map<IdKind, std::size_t> id_counts;
  std::map<unsigned, std::size_t> cooccurrence;
  std::size_t other_ids_only = 0;
  std::size_t no_ids = 0;
  std::array<std::size_t, kNumClasses> known{};
  std::array<std::size_t, kNumClasses> classified{};
  std::size_t unique_dois = 0;
  std::size_t unique_isbns = 0;
  std::size_t new_doi_citations = 0;
  std::size_t unique_new_dois = 0;
  std::size_t pages_with_doi = 0;
  std::size_t pages_with_isbn = 0;
  std::array<YearHistogram, kNumClasses> years;
  std::map<std::size_t, std::size_t> dois_per_page;  // distinct DOIs -> pages
  std::vector<JournalCount> journals;                // full ranking

  double share(std::size_t pages) const {
    return pages_total ? static_cast<double>(pages) / static_cast<double>(pages_total) : 0.0;
  }
};

struct ReportConfig {
  int first_year = 1500;
  int last_year = 2020;
  std::size_t smoothing_window = 4;
  bool trailing_smoothing = false;
  std::size_t top_journals = 20;
  bool csv = true;
  bool png = true;
  std::size_t workers = 4;

  std::vector<std::string> violations() const;
};

// `pages_total` counts every page processed, including pages without citations; zero
// means "pages seen in the corpus".
CorpusStats compute_stats(const std::vector<CorpusEntry>& corpus, std::size_t pages_total, const ReportConfig& cfg);

std::vector<JournalCount> top_journals(const CorpusStats& s, std::size_t n);

// Writes CSV tables, PNG plots and summary.md into `dir`. Returns the written file names.
std::vector<std::string> emit_report(const CorpusStats& s, const ReportConfig& cfg,
                                     const std::optional<HeuristicReport>& heuristics,
                                     const std::filesystem::path& dir);

// RGB raster written through libpng with no timestamp chunk, so equal pixels
// give equal bytes.
class Canvas {
public:
  Canvas(int width, int height);
  void fill_rect(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> rgb);
  void line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> rgb);
  void write_png(const std::filesystem::path& path) const;
  int width() const { return w_; }
  int height() const { return h_; }

private:
  void put(int x, int y, std::array<std::uint8_t, 3> rgb);
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

}  // namespace wikicite
