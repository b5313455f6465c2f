#include "wikicite/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "wikicite/common.hpp"

namespace wikicite {

unsigned presence_pattern(const UniformCitation& c) {
  unsigned bits = 0;
  for (auto kind : kPatternKinds) bits = (bits << 1) | (c.has_id(kind) ? 1u : 0u);
  return bits;
}

std::vector<double> smooth(const std::vector<double>& series, std::size_t window, bool trailing) {
  if (window == 0) throw std::invalid_argument("smoothing window must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const auto w = static_cast<std::ptrdiff_t>(window);
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = trailing ? i - w + 1 : i - w / 2;
    const std::ptrdiff_t hi = trailing ? i : i + w - 1 - w / 2;
    double sum = 0.0;
    std::size_t k = 0;
    for (auto j = std::max<std::ptrdiff_t>(lo, 0); j <= std::min(hi, n - 1); ++j, ++k) sum += series[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(k);
  }
  return out;
}

std::vector<std::string> ReportConfig::violations() const {
  std::vector<std::string> v;
  if (first_year > last_year) v.push_back("report first_year must not exceed last_year");
  if (smoothing_window < 1) v.push_back("smoothing_window must be >= 1");
  if (workers < 1) v.push_back("workers must be >= 1");
  return v;
}

// ---------------------------------------------------------------------------

StatsAccumulator::StatsAccumulator(int first_year, int last_year) {
  for (auto& y : years) {
    y.first_year = first_year;
    y.last_year = last_year;
    y.counts.assign(static_cast<std::size_t>(last_year - first_year + 1), 0);
  }
}

void StatsAccumulator::add(const CorpusEntry& e) {
  const auto& c = e.record.citation;
  const auto cls = static_cast<std::size_t>(e.label);
  ++citations;
  pages.insert(e.record.page_id);
  for (const auto& [kind, value] : c.id_list) ++id_counts[kind];

  const unsigned bits = presence_pattern(c);
  if (bits) ++patterns[bits];
  else if (!c.id_list.empty()) ++other_ids_only;
  else ++no_ids;

  (e.known ? known : classified)[cls] += 1;

  if (auto it = c.id_list.find(IdKind::kDoi); it != c.id_list.end()) {
    dois.insert(it->second);
    page_dois[e.record.page_id].insert(it->second);
  }
  if (auto it = c.id_list.find(IdKind::kIsbn); it != c.id_list.end()) {
    isbns.insert(it->second);
    pages_with_isbn.insert(e.record.page_id);
  }
  if (!e.new_doi.empty()) new_dois.insert(e.new_doi);

  auto& hist = years[cls];
  if (auto y = publication_year(c)) {
    if (*y >= hist.first_year && *y <= hist.last_year) ++hist.counts[static_cast<std::size_t>(*y - hist.first_year)];
    else ++hist.out_of_range;
  } else {
    ++hist.missing;
  }

  if (e.label == ClassLabel::kJournal) {
    const std::string spelling = text::collapse_whitespace(c.periodical);
    if (!spelling.empty()) ++journals[text::fold(spelling)][spelling];
  }
}

void StatsAccumulator::merge(const StatsAccumulator& o) {
  citations += o.citations;
  for (const auto& [k, n] : o.id_counts) id_counts[k] += n;
  for (const auto& [k, n] : o.patterns) patterns[k] += n;
  other_ids_only += o.other_ids_only;
  no_ids += o.no_ids;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    known[i] += o.known[i];
    classified[i] += o.classified[i];
    for (std::size_t b = 0; b < years[i].counts.size(); ++b) years[i].counts[b] += o.years[i].counts[b];
    years[i].missing += o.years[i].missing;
    years[i].out_of_range += o.years[i].out_of_range;
  }
  dois.insert(o.dois.begin(), o.dois.end());
  isbns.insert(o.isbns.begin(), o.isbns.end());
  new_dois.insert(o.new_dois.begin(), o.new_dois.end());
  for (const auto& [page, set] : o.page_dois) page_dois[page].insert(set.begin(), set.end());
  pages.insert(o.pages.begin(), o.pages.end());
  pages_with_isbn.insert(o.pages_with_isbn.begin(), o.pages_with_isbn.end());
  for (const auto& [key, spellings] : o.journals)
    for (const auto& [s, n] : spellings) journals[key][s] += n;
}

CorpusStats compute_stats(const std::vector<CorpusEntry>& corpus, std::size_t pages_total, const ReportConfig& cfg) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min(cfg.workers, corpus.size() / 1024 + 1));
  std::vector<StatsAccumulator> parts(chunks, StatsAccumulator(cfg.first_year, cfg.last_year));
  {
    std::vector<std::thread> pool;
    const std::size_t per = (corpus.size() + chunks - 1) / chunks;
    for (std::size_t t = 0; t < chunks; ++t) {
      pool.emplace_back([&, t] {
        const std::size_t end = std::min(corpus.size(), (t + 1) * per);
        for (std::size_t i = t * per; i < end; ++i) parts[t].add(corpus[i]);
      });
    }
    for (auto& th : pool) th.join();
  }
  StatsAccumulator acc(cfg.first_year, cfg.last_year);
  for (const auto& p : parts) acc.merge(p);

  CorpusStats s;
  s.citations_total = acc.citations;
  s.pages_total = pages_total ? pages_total : acc.pages.size();
  s.id_counts = acc.id_counts;
  s.cooccurrence = acc.patterns;
  s.other_ids_only = acc.other_ids_only;
  s.no_ids = acc.no_ids;
  s.known = acc.known;
  s.classified = acc.classified;
  s.unique_dois = acc.dois.size();
  s.unique_isbns = acc.isbns.size();
  for (const auto& e : corpus)
    if (!e.new_doi.empty()) ++s.new_doi_citations;
  s.unique_new_dois = acc.new_dois.size();
  s.pages_with_doi = acc.page_dois.size();
  s.pages_with_isbn = acc.pages_with_isbn.size();
  s.years = acc.years;
  for (const auto& [page, set] : acc.page_dois) ++s.dois_per_page[set.size()];

  for (const auto& [key, spellings] : acc.journals) {
    JournalCount j;
    j.key = key;
    std::size_t best = 0;
    for (const auto& [spelling, n] : spellings) {
      j.citations += n;
      if (n > best) {  // map order makes the lexicographically first spelling win ties
        best = n;
        j.name = spelling;
      }
    }
    s.journals.push_back(std::move(j));
  }
  std::sort(s.journals.begin(), s.journals.end(), [](const JournalCount& a, const JournalCount& b) {
    return a.citations != b.citations ? a.citations > b.citations : a.key < b.key;
  });
  return s;
}

std::vector<JournalCount> top_journals(const CorpusStats& s, std::size_t n) {
  return {s.journals.begin(), s.journals.begin() + static_cast<std::ptrdiff_t>(std::min(n, s.journals.size()))};
}

// ---------------------------------------------------------------------------
// Raster plots

Canvas::Canvas(int width, int height) : w_(width), h_(height), px_(static_cast<std::size_t>(width * height * 3), 255) {}

void Canvas::put(int x, int y, std::array<std::uint8_t, 3> rgb) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const auto i = static_cast<std::size_t>((y * w_ + x) * 3);
  px_[i] = rgb[0];
  px_[i + 1] = rgb[1];
  px_[i + 2] = rgb[2];
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> rgb) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) put(x, y, rgb);
}

void Canvas::line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> rgb) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    const int x = static_cast<int>(std::lround(x0 + (x1 - x0) * t));
    const int y = static_cast<int>(std::lround(y0 + (y1 - y0) * t));
    put(x, y, rgb);
    put(x, y + 1, rgb);
  }
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t len) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), len);
}

}  // namespace

void Canvas::write_png(const std::filesystem::path& path) const {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("cannot encode " + path.string());
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 9);
  png_write_info(png, info);
  for (int y = 0; y < h_; ++y)
    png_write_row(png, const_cast<png_bytep>(px_.data() + static_cast<std::size_t>(y * w_ * 3)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, out);
}

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 3> kClassColors = {{{31, 119, 180}, {214, 39, 40}, {44, 160, 44}}};
constexpr std::array<std::uint8_t, 3> kAxis = {0, 0, 0};
constexpr int kMargin = 40;

void axes(Canvas& c) {
  c.line(kMargin, c.height() - kMargin, c.width() - 10, c.height() - kMargin, kAxis);
  c.line(kMargin, 10, kMargin, c.height() - kMargin, kAxis);
}

// Polyline of `ys` over the plot area, scaled so `ymax` touches the top.
void series(Canvas& c, const std::vector<double>& ys, double ymax, std::array<std::uint8_t, 3> rgb) {
  if (ys.size() < 2 || ymax <= 0) return;
  const double pw = c.width() - kMargin - 10, ph = c.height() - kMargin - 10;
  auto px = [&](std::size_t i) { return kMargin + pw * static_cast<double>(i) / static_cast<double>(ys.size() - 1); };
  auto py = [&](double v) { return c.height() - kMargin - ph * v / ymax; };
  for (std::size_t i = 1; i < ys.size(); ++i) c.line(px(i - 1), py(ys[i - 1]), px(i), py(ys[i]), rgb);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string pattern_bits(unsigned bits) {
  std::string out;
  for (int b = static_cast<int>(kPatternKinds.size()) - 1; b >= 0; --b) {
    if (!out.empty()) out += ',';
    out += ((bits >> b) & 1u) ? '1' : '0';
  }
  return out;
}

std::string share_text(double x) { return format_double(x, 6); }

}  // namespace

std::vector<std::string> emit_report(const CorpusStats& s, const ReportConfig& cfg,
                                     const std::optional<HeuristicReport>& heuristics,
                                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UserError("cannot create report directory " + dir.string() + ": " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& body) {
    write_file_atomic(dir / name, body);
    written.push_back(name);
  };

  std::array<std::vector<double>, kNumClasses> smoothed;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> raw(s.years[c].counts.begin(), s.years[c].counts.end());
    smoothed[c] = raw.empty() ? raw : smooth(raw, cfg.smoothing_window, cfg.trailing_smoothing);
  }

  if (cfg.csv) {
    std::ostringstream t;
    t << "metric,value\n"
      << "citations_total," << s.citations_total << "\n"
      << "pages_total," << s.pages_total << "\n"
      << "unique_dois," << s.unique_dois << "\n"
      << "unique_isbns," << s.unique_isbns << "\n"
      << "pages_with_doi," << s.pages_with_doi << "\n"
      << "pages_with_doi_share," << share_text(s.share(s.pages_with_doi)) << "\n"
      << "pages_with_isbn," << s.pages_with_isbn << "\n"
      << "pages_with_isbn_share," << share_text(s.share(s.pages_with_isbn)) << "\n"
      << "other_identifiers_only," << s.other_ids_only << "\n"
      << "no_identifiers," << s.no_ids << "\n"
      << "new_doi_citations," << s.new_doi_citations << "\n"
      << "unique_new_dois," << s.unique_new_dois << "\n";
    put("totals.csv", t.str());

    std::ostringstream ids;
    ids << "identifier,citations\n";
    for (const auto& [kind, n] : s.id_counts) ids << to_string(kind) << "," << n << "\n";
    put("identifiers.csv", ids.str());

    std::vector<std::pair<unsigned, std::size_t>> rows(s.cooccurrence.begin(), s.cooccurrence.end());
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first > b.first; });
    std::ostringstream co;
    co << "DOI,ISBN,PMC,PMID,ARXIV,citations\n";
    for (const auto& [bits, n] : rows) co << pattern_bits(bits) << "," << n << "\n";
    put("cooccurrence.csv", co.str());

    std::ostringstream cls;
    cls << "class,known,classified,total\n";
    for (auto c : kAllClasses) {
      const auto i = static_cast<std::size_t>(c);
      cls << to_string(c) << "," << s.known[i] << "," << s.classified[i] << "," << s.known[i] + s.classified[i] << "\n";
    }
    put("classes.csv", cls.str());

    std::ostringstream yr;
    yr << "class,year,citations,smoothed\n";
    for (auto c : kAllClasses) {
      const auto i = static_cast<std::size_t>(c);
      const auto& h = s.years[i];
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        yr << to_string(c) << "," << h.first_year + static_cast<int>(b) << "," << h.counts[b] << ","
           << format_double(smoothed[i][b], 9) << "\n";
    }
    put("years.csv", yr.str());

    std::ostringstream ym;
    ym << "class,missing_year,out_of_range\n";
    for (auto c : kAllClasses) {
      const auto& h = s.years[static_cast<std::size_t>(c)];
      ym << to_string(c) << "," << h.missing << "," << h.out_of_range << "\n";
    }
    put("years_missing.csv", ym.str());

    std::ostringstream dp;
    dp << "distinct_dois,pages\n";
    for (const auto& [k, n] : s.dois_per_page) dp << k << "," << n << "\n";
    put("dois_per_page.csv", dp.str());

    std::ostringstream tj;
    tj << "rank,journal,citations\n";
    std::size_t rank = 0;
    for (const auto& j : top_journals(s, cfg.top_journals)) tj << ++rank << "," << csv_field(j.name) << "," << j.citations << "\n";
    put("top_journals.csv", tj.str());

    if (heuristics) {
      std::ostringstream pr;
      pr << "threshold,predicted,true_positive,precision,recall\n";
      for (const auto& p : heuristics->grid)
        pr << format_double(p.threshold, 6) << "," << p.predicted << "," << p.true_positive << ","
           << format_double(p.precision, 6) << "," << format_double(p.recall, 6) << "\n";
      put("threshold_grid.csv", pr.str());
    }
  }

  if (cfg.png) {
    Canvas years_png(800, 400);
    axes(years_png);
    double ymax = 0;
    for (const auto& v : smoothed)
      for (double x : v) ymax = std::max(ymax, x);
    for (std::size_t c = 0; c < kNumClasses; ++c) series(years_png, smoothed[c], ymax, kClassColors[c]);
    years_png.write_png(dir / "years.png");
    written.push_back("years.png");

    Canvas bars(800, 400);
    axes(bars);
    if (!s.dois_per_page.empty()) {
      const std::size_t max_bin = std::min<std::size_t>(s.dois_per_page.rbegin()->first, 100);
      std::size_t top = 0;
      for (const auto& [k, n] : s.dois_per_page) top = std::max(top, n);
      const double bw = (bars.width() - kMargin - 10.0) / static_cast<double>(max_bin);
      const double ph = bars.height() - kMargin - 10.0;
      for (const auto& [k, n] : s.dois_per_page) {
        if (k > max_bin) continue;
        const int x0 = kMargin + static_cast<int>(std::lround(bw * static_cast<double>(k - 1))) + 1;
        const int x1 = kMargin + static_cast<int>(std::lround(bw * static_cast<double>(k))) - 1;
        const int y1 = bars.height() - kMargin - 1;
        const int y0 = y1 - static_cast<int>(std::lround(ph * static_cast<double>(n) / static_cast<double>(top)));
        bars.fill_rect(x0, y0, std::max(x0, x1), y1, kClassColors[0]);
      }
    }
    bars.write_png(dir / "dois_per_page.png");
    written.push_back("dois_per_page.png");

    if (heuristics) {
      Canvas pr(800, 400);
      axes(pr);
      std::vector<double> p, r;
      for (const auto& g : heuristics->grid) {
        p.push_back(g.precision);
        r.push_back(g.recall);
      }
      series(pr, p, 1.0, kClassColors[0]);
      series(pr, r, 1.0, kClassColors[1]);
      pr.write_png(dir / "threshold_grid.png");
      written.push_back("threshold_grid.png");
    }
  }

  std::ostringstream md;
  md << "# Citation report\n\n"
     << "| metric | value |\n|---|---|\n"
     << "| citations | " << s.citations_total << " |\n"
     << "| pages | " << s.pages_total << " |\n"
     << "| unique DOIs | " << s.unique_dois << " |\n"
     << "| unique ISBNs | " << s.unique_isbns << " |\n"
     << "| pages with a DOI | " << s.pages_with_doi << " (" << format_double(100.0 * s.share(s.pages_with_doi), 2)
     << "%) |\n"
     << "| pages with an ISBN | " << s.pages_with_isbn << " (" << format_double(100.0 * s.share(s.pages_with_isbn), 2)
     << "%) |\n"
     << "| citations with a new DOI | " << s.new_doi_citations << " |\n"
     << "| unique new DOIs | " << s.unique_new_dois << " |\n\n";
  md << "## Classes\n\n| class | known | classified | total |\n|---|---|---|---|\n";
  std::size_t known_total = 0, classified_total = 0;
  for (auto c : kAllClasses) {
    const auto i = static_cast<std::size_t>(c);
    known_total += s.known[i];
    classified_total += s.classified[i];
    md << "| " << to_string(c) << " | " << s.known[i] << " | " << s.classified[i] << " | "
       << s.known[i] + s.classified[i] << " |\n";
  }
  md << "| total | " << known_total << " | " << classified_total << " | " << known_total + classified_total
     << " |\n\n";
  md << "## Identifier presence\n\n| DOI | ISBN | PMC | PMID | ARXIV | citations |\n|---|---|---|---|---|---|\n";
  for (const auto& [bits, n] : s.cooccurrence) {
    auto b = pattern_bits(bits);
    std::replace(b.begin(), b.end(), ',', '|');
    md << "|" << b << "| " << n << " |\n";
  }
  md << "\nOther identifiers only: " << s.other_ids_only << ". No identifiers: " << s.no_ids << ".\n\n";
  md << "## Most cited journals\n\n| rank | journal | citations |\n|---|---|---|\n";
  std::size_t rank = 0;
  for (const auto& j : top_journals(s, cfg.top_journals)) md << "| " << ++rank << " | " << j.name << " | " << j.citations << " |\n";
  if (heuristics && heuristics->chosen) {
    md << "\n## Lookup threshold\n\nChosen score threshold " << format_double(heuristics->chosen->threshold, 3)
       << " (precision " << format_double(heuristics->chosen->precision, 4) << ", recall "
       << format_double(heuristics->chosen->recall, 4) << " on the tuning split).\n";
  }
  put("summary.md", md.str());
  return written;
}

}  // namespace wikicite
