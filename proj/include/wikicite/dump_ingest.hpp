#pragma once

#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>

#include "wikicite/common.hpp"

namespace wikicite {

struct WikiPage {
  std::int64_t page_id = 0;
  std::string title;
  int ns = 0;
  std::string wikitext;
  bool is_redirect = false;
};

enum class Compression { kAuto, kNone, kGzip, kBzip2 };

// Where a dump comes from. Either a path or an already-open stream; with kAuto the
// compression is sniffed from the first bytes.
struct DumpSource {
  std::filesystem::path location;
  std::istream* stream = nullptr;
  Compression compression = Compression::kAuto;

  static DumpSource file(std::filesystem::path p, Compression c = Compression::kAuto) {
    return {std::move(p), nullptr, c};
  }
  static DumpSource from_stream(std::istream& in, Compression c = Compression::kAuto) {
    return {{}, &in, c};
  }
};

class DumpError : public UserError {
public:
  DumpError(const std::string& what, std::uint64_t byte_offset);
  std::uint64_t byte_offset() const { return offset_; }

private:
  std::uint64_t offset_;
};

struct DumpCounters {
  std::uint64_t pages = 0;
  std::uint64_t skipped_missing_text = 0;
};

// Pull-style reader over a MediaWiki XML dump. Input is decompressed and fed to the XML
// parser in fixed-size chunks, so at most one chunk plus the pages completed inside it
// are held in memory.
class PageStream {
public:
  explicit PageStream(const DumpSource& source, std::size_t chunk_size = 1 << 16);
  ~PageStream();
  PageStream(const PageStream&) = delete;
  PageStream& operator=(const PageStream&) = delete;

  // Next page in dump order, or nullopt at the end. Throws DumpError on malformed or
  // truncated input once every complete page before the fault has been returned.
  std::optional<WikiPage> next();

  const DumpCounters& counters() const { return counters_; }
  // High-water mark of bytes held in partially built and queued pages.
  std::size_t peak_buffered_bytes() const { return peak_buffered_; }

  struct Impl;

private:
  void pump();

  std::unique_ptr<Impl> impl_;
  DumpCounters counters_;
  std::size_t peak_buffered_ = 0;
};

// Namespace-0, non-redirect pages are the only ones that carry article citations.
bool is_citable_article(const WikiPage& page);

// True when wikitext opens with a #REDIRECT directive (any case, leading space allowed).
bool has_redirect_directive(std::string_view wikitext);

}  // namespace wikicite
