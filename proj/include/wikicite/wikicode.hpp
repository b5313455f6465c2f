#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wikicite/common.hpp"
#include "wikicite/dump_ingest.hpp"

namespace wikicite {

// One `{{name|...}}` call. Nested calls inside parameter values stay verbatim.
struct TemplateCall {
  std::string name;
  std::vector<std::string> positional_params;
  std::vector<std::pair<std::string, std::string>> named_params;
  Span source_span;

  // Value of a named parameter, matched case-insensitively; the last duplicate wins,
  // as in MediaWiki.
  const std::string* find(std::string_view key) const;
  // Canonical print: "{{name|p1|p2|k1=v1|k2=v2}}".
  std::string serialize() const;

  bool same_structure(const TemplateCall& other) const {
    return name == other.name && positional_params == other.positional_params &&
           named_params == other.named_params;
  }
};

// Lowercase, underscores to spaces, whitespace collapsed, "template:" prefix dropped.
std::string normalize_template_name(std::string_view raw);

// Every top-level template call in `wikitext`, including those inside <ref> tags.
// Comments, <nowiki> and <pre> content are opaque. Unbalanced braces are plain text.
// Spans are offset by `base_offset`.
std::vector<TemplateCall> tokenize_templates(std::string_view wikitext, std::size_t base_offset = 0);

// Parses a single call text that starts with "{{" and ends with "}}".
std::optional<TemplateCall> parse_template_call(std::string_view call_text, Span span);

// Supported citation templates. Redirect-style aliases resolve to a canonical class.
class TemplateRegistry {
public:
  // Line format: `name` or `alias = canonical`; '#' starts a comment.
  static TemplateRegistry parse(std::string_view config_text);
  static TemplateRegistry load(const std::filesystem::path& path);

  bool contains(std::string_view normalized_name) const;
  // Canonical class for a supported name; the name itself when it is canonical.
  std::string canonical(std::string_view normalized_name) const;
  std::size_t size() const { return canonical_.size(); }
  std::vector<std::string> names() const;

private:
  std::map<std::string, std::string, std::less<>> canonical_;
};

struct RawCitation {
  std::int64_t page_id = 0;
  std::string page_title;
  TemplateCall call;
  std::string section_path;
  int order_index = 0;
  std::vector<std::string> preceding_words;
  std::size_t page_total_words = 0;
  std::size_t page_citation_count = 0;
};

// Plain text of a page after markup stripping, with each word anchored to the byte
// offset it came from.
struct PageText {
  struct Word {
    std::string text;
    std::size_t offset;
  };
  struct Heading {
    std::string title;
    int level;
    std::size_t offset;
  };
  std::vector<Word> words;
  std::vector<Heading> headings;

  // Up to `max_words` words that start before `offset`, in reading order.
  std::vector<std::string> words_before(std::size_t offset, std::size_t max_words) const;
  // Title of the nearest heading before `offset`, or "LEAD".
  std::string section_at(std::size_t offset) const;
};

PageText strip_markup(std::string_view wikitext);

struct TextContext {
  std::vector<std::string> preceding_words;
  std::string section_path;
};

inline constexpr std::size_t kStatementWords = 40;

TextContext plain_text_context(std::string_view wikitext, Span span,
                               std::size_t max_words = kStatementWords);

struct ExtractStats {
  std::uint64_t calls_seen = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t ref_reuse_dropped = 0;
};

// Supported citation calls on the page, first occurrence per source, in document order,
// with page context filled in.
std::vector<RawCitation> extract_citations(const WikiPage& page, const TemplateRegistry& known,
                                           std::size_t max_words = kStatementWords,
                                           ExtractStats* stats = nullptr);

// Dedup identity of a call; nullopt when the call carries no title, identifier or URL
// and therefore must never be merged with anything.
std::optional<std::string> citation_dedup_key(const TemplateCall& call);

}  // namespace wikicite
