#include "wikicite/dump_ingest.hpp"

#include <expat.h>

#include <array>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <charconv>
#include <cstring>
#include <fstream>
#include <vector>

namespace wikicite {

DumpError::DumpError(const std::string& what, std::uint64_t byte_offset)
    : UserError(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}

bool has_redirect_directive(std::string_view wikitext) {
  return text::istarts_with(text::trim(wikitext), "#redirect");
}

bool is_citable_article(const WikiPage& page) { return page.ns == 0 && !page.is_redirect; }

namespace {

namespace io = boost::iostreams;

// Replays a few sniffed bytes before continuing with the wrapped stream.
class PrefixedSource {
public:
  using char_type = char;
  using category = io::source_tag;

  PrefixedSource(std::string prefix, std::istream* in) : prefix_(std::move(prefix)), in_(in) {}

  std::streamsize read(char* s, std::streamsize n) {
    std::streamsize done = 0;
    while (pos_ < prefix_.size() && done < n) s[done++] = prefix_[pos_++];
    if (done < n) {
      in_->read(s + done, n - done);
      done += in_->gcount();
    }
    return done == 0 ? -1 : done;
  }

private:
  std::string prefix_;
  std::size_t pos_ = 0;
  std::istream* in_;
};

enum class Field { kNone, kTitle, kNs, kId, kText };

}  // namespace

struct PageStream::Impl {
  std::ifstream file;
  io::filtering_istream in;
  XML_Parser parser = nullptr;
  std::vector<char> chunk;
  bool eof = false;
  std::exception_ptr pending_error;

  std::vector<std::string> path;
  Field field = Field::kNone;
  std::string buffer;

  // Page under construction.
  bool in_page = false;
  bool have_id = false;
  bool have_text = false;
  bool redirect_element = false;
  WikiPage page;
  std::deque<WikiPage> ready;
  std::size_t queued_bytes = 0;
  DumpCounters* counters = nullptr;

  ~Impl() {
    if (parser) XML_ParserFree(parser);
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char**) {
    static_cast<Impl*>(self)->start(name);
  }
  static void on_end(void* self, const XML_Char* name) { static_cast<Impl*>(self)->end(name); }
  static void on_chars(void* self, const XML_Char* s, int len) {
    auto* impl = static_cast<Impl*>(self);
    if (impl->field != Field::kNone) impl->buffer.append(s, static_cast<std::size_t>(len));
  }

  void start(std::string_view name) {
    path.emplace_back(name);
    const std::size_t depth = path.size();
    if (name == "page" && depth == 2) {
      in_page = true;
      have_id = have_text = redirect_element = false;
      page = WikiPage{};
      return;
    }
    if (!in_page) return;
    // path: mediawiki/page/<x> or mediawiki/page/revision/text
    if (depth == 3) {
      if (name == "title") field = Field::kTitle;
      else if (name == "ns") field = Field::kNs;
      else if (name == "id" && !have_id) field = Field::kId;
      else if (name == "redirect") redirect_element = true;
      else if (name == "revision") {
        // Histories carry several revisions; only the last one is kept.
        have_text = false;
        page.wikitext.clear();
      }
    } else if (depth == 4 && name == "text" && path[2] == "revision") {
      field = Field::kText;
    }
    buffer.clear();
  }

  void end(std::string_view name) {
    switch (field) {
      case Field::kTitle:
        page.title = buffer;
        break;
      case Field::kNs: {
        auto t = text::trim(buffer);
        std::from_chars(t.data(), t.data() + t.size(), page.ns);
        break;
      }
      case Field::kId: {
        auto t = text::trim(buffer);
        std::from_chars(t.data(), t.data() + t.size(), page.page_id);
        have_id = true;
        break;
      }
      case Field::kText:
        page.wikitext = std::move(buffer);
        have_text = true;
        break;
      case Field::kNone:
        break;
    }
    field = Field::kNone;
    buffer.clear();
    if (name == "page" && path.size() == 2 && in_page) finish_page();
    path.pop_back();
  }

  void finish_page() {
    in_page = false;
    if (!have_text) {
      ++counters->skipped_missing_text;
      return;
    }
    page.is_redirect = redirect_element || has_redirect_directive(page.wikitext);
    queued_bytes += page.wikitext.size() + page.title.size();
    ready.push_back(std::move(page));
    ++counters->pages;
  }

  std::size_t buffered() const { return queued_bytes + buffer.size() + page.wikitext.size(); }

  [[noreturn]] void fail() {
    std::string msg = "malformed dump XML: ";
    msg += XML_ErrorString(XML_GetErrorCode(parser));
    throw DumpError(msg, static_cast<std::uint64_t>(XML_GetCurrentByteIndex(parser)));
  }
};

PageStream::PageStream(const DumpSource& source, std::size_t chunk_size)
    : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.counters = &counters_;
  std::istream* raw = source.stream;
  if (!raw) {
    im.file.open(source.location, std::ios::binary);
    if (!im.file) throw UserError("cannot open dump " + source.location.string());
    raw = &im.file;
  }
  std::array<char, 3> magic{};
  raw->read(magic.data(), magic.size());
  std::string prefix(magic.data(), static_cast<std::size_t>(raw->gcount()));

  Compression c = source.compression;
  if (c == Compression::kAuto) {
    if (prefix.size() >= 2 && static_cast<unsigned char>(prefix[0]) == 0x1f &&
        static_cast<unsigned char>(prefix[1]) == 0x8b)
      c = Compression::kGzip;
    else if (prefix == "BZh")
      c = Compression::kBzip2;
    else
      c = Compression::kNone;
  }
  if (c == Compression::kGzip) im.in.push(io::gzip_decompressor());
  if (c == Compression::kBzip2) im.in.push(io::bzip2_decompressor());
  im.in.push(PrefixedSource(std::move(prefix), raw));

  im.parser = XML_ParserCreate(nullptr);
  XML_SetUserData(im.parser, &im);
  XML_SetElementHandler(im.parser, &Impl::on_start, &Impl::on_end);
  XML_SetCharacterDataHandler(im.parser, &Impl::on_chars);
  im.chunk.resize(chunk_size);
}

PageStream::~PageStream() = default;

void PageStream::pump() {
  auto& im = *impl_;
  try {
    im.in.read(im.chunk.data(), static_cast<std::streamsize>(im.chunk.size()));
  } catch (const std::exception& e) {
    throw DumpError(std::string("decompression failed: ") + e.what(),
                    static_cast<std::uint64_t>(XML_GetCurrentByteIndex(im.parser)));
  }
  const auto got = static_cast<int>(im.in.gcount());
  im.eof = got == 0 || im.in.eof();
  if (XML_Parse(im.parser, im.chunk.data(), got, im.eof ? 1 : 0) == XML_STATUS_ERROR) im.fail();
  peak_buffered_ = std::max(peak_buffered_, im.buffered());
}

std::optional<WikiPage> PageStream::next() {
  auto& im = *impl_;
  while (im.ready.empty() && !im.eof && !im.pending_error) {
    try {
      pump();
    } catch (...) {
      im.pending_error = std::current_exception();
    }
  }
  if (!im.ready.empty()) {
    WikiPage p = std::move(im.ready.front());
    im.ready.pop_front();
    im.queued_bytes -= p.wikitext.size() + p.title.size();
    return p;
  }
  if (im.pending_error) std::rethrow_exception(im.pending_error);
  return std::nullopt;
}

}  // namespace wikicite
