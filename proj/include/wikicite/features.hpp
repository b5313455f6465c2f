#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "wikicite/labels.hpp"
#include "wikicite/pos_tagger.hpp"
#include "wikicite/uniform.hpp"

namespace wikicite {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

struct VocabConfig {
  std::size_t min_count = 5;
  std::size_t max_statement_words = kStatementWords;
  std::size_t pos_top = 35;
  std::size_t sections_top = 150;
  std::uint32_t subword_buckets = 100003;
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 6;
};

struct Vocabulary {
  VocabConfig config;
  std::vector<std::string> tokens;  // index = id; 0 pad, 1 unk
  std::vector<std::string> chars;   // UTF-8 code points, same id layout
  std::vector<std::string> pos_tags;
  std::vector<std::string> sections;

  std::unordered_map<std::string, int> token_ids;
  std::unordered_map<std::string, int> char_ids;
  std::unordered_map<std::string, int> pos_index;
  std::unordered_map<std::string, int> section_index;

  int token_id(const std::string& token) const;
  int char_id(const std::string& ch) const;
  void reindex();

  nlohmann::ordered_json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  // Content hash, recorded in model checkpoints to catch vocabulary skew.
  std::string hash() const;
};

struct FeatureVector {
  std::vector<int> char_ids;
  std::vector<int> token_ids;
  // Parallel to token_ids: hashed character n-gram buckets for unknown tokens, empty
  // for known ones.
  std::vector<std::vector<int>> subword_ids;
  std::vector<int> pos_counts;          // pos_top entries
  std::vector<std::uint8_t> section_onehot;  // sections_top entries, at most one set
  double order_scalar = 0.0;
  double totwords_scalar = 0.0;

  bool operator==(const FeatureVector&) const = default;
};

// Code points of a UTF-8 string; invalid bytes come through as single-byte strings.
std::vector<std::string> utf8_chars(std::string_view s);

// Statement token form: edge punctuation stripped, lowercased.
std::string statement_token(std::string_view word);

// The last max_words statement words of a record.
std::vector<std::string> statement_words(const CitationRecord& r, std::size_t max_words);

// Template-syntax text the character path reads. It is printed from the leakage-stripped
// uniform record so template names, identifiers and URLs never reach the model.
std::string citation_text(const UniformCitation& c);

std::uint32_t fnv1a(std::string_view s);
// Bucketed character n-grams of "<token>".
std::vector<int> subword_buckets(std::string_view token, const VocabConfig& cfg);

Vocabulary build_vocabulary(const std::vector<CitationRecord>& train, const PosTagger& tagger,
                            const VocabConfig& cfg = {});

// Counts cover the tokens whose tag is in the vocabulary's tag list.
FeatureVector featurize(const CitationRecord& r, const Vocabulary& v, const PosTagger& tagger);

}  // namespace wikicite
