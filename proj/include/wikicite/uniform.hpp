#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wikicite/wikicode.hpp"

namespace wikicite {

enum class IdKind {
  kDoi, kIsbn, kPmc, kPmid, kArxiv, kOclc, kIssn, kBibcode,
  kJstor, kLccn, kMr, kOl, kOsti, kSsrn, kZbl,
};
inline constexpr std::size_t kIdKindCount = 15;

std::string_view to_string(IdKind kind);
std::optional<IdKind> parse_id_kind(std::string_view name);
std::array<IdKind, kIdKindCount> all_id_kinds();

struct Author {
  std::string raw;
  std::string first;
  std::string last;

  std::string display() const;
  bool empty() const { return raw.empty() && first.empty() && last.empty(); }
  bool operator==(const Author&) const = default;
};

// The harmonized citation record. Field order is the dataset column order.
struct UniformCitation {
  std::string type;
  std::string title;
  std::vector<Author> authors;
  std::string periodical;
  std::string chapter;
  std::string publisher;
  std::string edition;
  std::string publication_place;
  std::string date;
  std::string year;
  std::string access_date;
  std::string archive_url;
  std::string archive_date;
  std::string volume;
  std::string issue;
  std::string pages;
  std::string url;
  std::string url_top_level_domain;
  std::string work;
  std::string website;
  std::string newspaper;
  std::string series;
  std::string language;
  std::string degree;
  std::string conference;
  std::string encyclopedia;
  std::map<IdKind, std::string> id_list;
  std::string quote;
  std::string trans_title;

  bool operator==(const UniformCitation&) const = default;

  // Text-valued field by uniform key; nullptr for authors, id_list and unknown keys.
  std::string* text_field(std::string_view key);
  const std::string* text_field(std::string_view key) const;
  bool has_id(IdKind kind) const { return id_list.count(kind) != 0; }
};

inline constexpr std::array<std::string_view, 29> kUniformKeys = {
    "type", "title", "authors", "periodical", "chapter", "publisher", "edition",
    "publication_place", "date", "year", "access_date", "archive_url", "archive_date",
    "volume", "issue", "pages", "url", "url_top_level_domain", "work", "website",
    "newspaper", "series", "language", "degree", "conference", "encyclopedia", "id_list",
    "quote", "trans_title"};

nlohmann::ordered_json to_json(const UniformCitation& c);
UniformCitation uniform_from_json(const nlohmann::json& j);

// One row of the released dataset: the uniform record plus where it was found.
struct CitationRecord {
  UniformCitation citation;
  std::int64_t page_id = 0;
  std::string page_title;
  std::string section_path;
  int order_index = 0;
  std::vector<std::string> preceding_words;
  std::size_t page_total_words = 0;
  std::size_t page_citation_count = 0;
  std::string template_text;

  bool operator==(const CitationRecord&) const = default;
};

nlohmann::ordered_json to_json(const CitationRecord& r);
CitationRecord record_from_json(const nlohmann::json& j);
std::string csv_header();
std::string to_csv_row(const CitationRecord& r);
std::string csv_escape(std::string_view field);

// Result of identifier normalization: a canonical value or the reason it was rejected.
struct IdResult {
  std::optional<std::string> value;
  std::string reason;

  explicit operator bool() const { return value.has_value(); }
};

IdResult normalize_identifier(IdKind kind, std::string_view raw);

// Registrable label of a URL's host ("https://www.bbc.co.uk/news" -> "bbc"); empty when
// the text does not parse as a URL.
std::string top_level_domain(std::string_view url);

// Four-digit year in [1000, 2030] from the year field, else from the date field.
std::optional<int> publication_year(const UniformCitation& c);

// Where one template parameter lands in the uniform record.
struct AliasTarget {
  std::string key;  // uniform key, "authors.raw|first|last", or "id.<KIND>"
  int index = 1;    // author position for numbered parameters
};

// Per-template parameter routing loaded from data files: `common.tsv` applies to every
// template, `<template_name>.tsv` (spaces as underscores) adds or overrides entries.
// A '#' in a parameter pattern stands for an author number.
class AliasTable {
public:
  static AliasTable load_dir(const std::filesystem::path& dir);
  static AliasTable parse(std::string_view common_tsv,
                          const std::map<std::string, std::string>& per_template_tsv = {});

  std::optional<AliasTarget> lookup(std::string_view template_class, std::string_view param) const;
  static std::string normalize_param(std::string_view raw);

private:
  struct Rules {
    std::map<std::string, std::string, std::less<>> exact;
    struct Numbered {
      std::string prefix, suffix, target;
    };
    std::vector<Numbered> numbered;
  };
  static void add_rules(Rules& rules, std::string_view tsv);
  static std::optional<AliasTarget> match(const Rules& rules, std::string_view param);

  Rules common_;
  std::map<std::string, Rules, std::less<>> per_template_;
};

struct MapStats {
  std::uint64_t mapped = 0;
  std::uint64_t dropped_params = 0;
  std::uint64_t rejected_ids = 0;
  std::uint64_t unknown_kind_ids = 0;
  std::uint64_t extra_id_values = 0;

  void merge(const MapStats& o);
};

class UnsupportedTemplate : public UserError {
public:
  using UserError::UserError;
};

UniformCitation map_to_uniform(const TemplateCall& call, const TemplateRegistry& registry,
                               const AliasTable& aliases, MapStats* stats = nullptr);

CitationRecord make_record(const RawCitation& raw, const TemplateRegistry& registry,
                           const AliasTable& aliases, MapStats* stats = nullptr);

// Light inline cleanup of parameter values: links to their labels, bold/italic quotes
// removed, whitespace collapsed. Nested templates are kept.
std::string clean_value(std::string_view value);

}  // namespace wikicite
