#include "wikicite/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace wikicite {

namespace {

template <typename Map>
std::vector<std::string> ranked(const Map& counts, std::size_t min_count, std::size_t limit) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [k, n] : counts)
    if (n >= min_count) items.emplace_back(k, n);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (items.size() > limit) items.resize(limit);
  std::vector<std::string> out;
  for (auto& [k, n] : items) out.push_back(std::move(k));
  return out;
}

std::vector<std::string> with_reserved(std::vector<std::string> rest) {
  std::vector<std::string> out = {"<pad>", "<unk>"};
  for (auto& s : rest) out.push_back(std::move(s));
  return out;
}

}  // namespace

int Vocabulary::token_id(const std::string& token) const {
  auto it = token_ids.find(token);
  return it == token_ids.end() ? kUnkId : it->second;
}

int Vocabulary::char_id(const std::string& ch) const {
  auto it = char_ids.find(ch);
  return it == char_ids.end() ? kUnkId : it->second;
}

void Vocabulary::reindex() {
  token_ids.clear();
  char_ids.clear();
  pos_index.clear();
  section_index.clear();
  for (std::size_t i = 2; i < tokens.size(); ++i) token_ids[tokens[i]] = static_cast<int>(i);
  for (std::size_t i = 2; i < chars.size(); ++i) char_ids[chars[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < pos_tags.size(); ++i) pos_index[pos_tags[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < sections.size(); ++i) section_index[sections[i]] = static_cast<int>(i);
}

nlohmann::ordered_json Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "wikicite-vocabulary";
  j["version"] = 1;
  j["config"] = {{"min_count", config.min_count},
                 {"max_statement_words", config.max_statement_words},
                 {"pos_top", config.pos_top},
                 {"sections_top", config.sections_top},
                 {"subword_buckets", config.subword_buckets},
                 {"ngram_min", config.ngram_min},
                 {"ngram_max", config.ngram_max}};
  j["tokens"] = tokens;
  j["chars"] = chars;
  j["pos_tags"] = pos_tags;
  j["sections"] = sections;
  return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "wikicite-vocabulary" || j.value("version", 0) != 1)
    throw UserError("unsupported vocabulary file format");
  Vocabulary v;
  const auto& c = j.at("config");
  v.config.min_count = c.at("min_count").get<std::size_t>();
  v.config.max_statement_words = c.at("max_statement_words").get<std::size_t>();
  v.config.pos_top = c.at("pos_top").get<std::size_t>();
  v.config.sections_top = c.at("sections_top").get<std::size_t>();
  v.config.subword_buckets = c.at("subword_buckets").get<std::uint32_t>();
  v.config.ngram_min = c.at("ngram_min").get<std::size_t>();
  v.config.ngram_max = c.at("ngram_max").get<std::size_t>();
  v.tokens = j.at("tokens").get<std::vector<std::string>>();
  v.chars = j.at("chars").get<std::vector<std::string>>();
  v.pos_tags = j.at("pos_tags").get<std::vector<std::string>>();
  v.sections = j.at("sections").get<std::vector<std::string>>();
  if (v.tokens.size() < 2 || v.chars.size() < 2) throw UserError("vocabulary lacks reserved ids");
  v.reindex();
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json().dump() + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw UserError("cannot read vocabulary " + path.string() + ": " + e.what());
  }
}

std::string Vocabulary::hash() const { return sha256_hex(to_json().dump()); }

// ---------------------------------------------------------------------------

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c < 0xF8) len = 4;
    else if (c >= 0xE0) len = c < 0xF0 ? 3 : 1;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::string statement_token(std::string_view word) { return text::lower(tagging_form(word)); }

std::vector<std::string> statement_words(const CitationRecord& r, std::size_t max_words) {
  const auto& w = r.preceding_words;
  const std::size_t skip = w.size() > max_words ? w.size() - max_words : 0;
  return {w.begin() + static_cast<std::ptrdiff_t>(skip), w.end()};
}

std::string citation_text(const UniformCitation& input) {
  const UniformCitation c = strip_leakage(input);
  std::string out = "{{citation";
  for (auto key : kUniformKeys) {
    if (key == "authors") {
      for (std::size_t i = 0; i < c.authors.size(); ++i)
        out += "|author" + std::to_string(i + 1) + "=" + c.authors[i].display();
    } else if (key != "id_list") {
      const std::string& v = *c.text_field(key);
      if (!v.empty()) out += "|" + std::string(key) + "=" + v;
    }
  }
  out += "}}";
  return out;
}

std::uint32_t fnv1a(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return h;
}

std::vector<int> subword_buckets(std::string_view token, const VocabConfig& cfg) {
  const auto cps = utf8_chars("<" + std::string(token) + ">");
  std::vector<int> out;
  for (std::size_t n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      std::string gram;
      for (std::size_t k = i; k < i + n; ++k) gram += cps[k];
      out.push_back(static_cast<int>(fnv1a(gram) % cfg.subword_buckets));
    }
  }
  // Tokens shorter than the smallest n-gram still get one bucket for the whole form.
  if (out.empty()) out.push_back(static_cast<int>(fnv1a("<" + std::string(token) + ">") % cfg.subword_buckets));
  return out;
}

Vocabulary build_vocabulary(const std::vector<CitationRecord>& train, const PosTagger& tagger,
                            const VocabConfig& cfg) {
  std::map<std::string, std::size_t> token_counts, char_counts, tag_counts, section_counts;
  for (const auto& r : train) {
    const auto words = statement_words(r, cfg.max_statement_words);
    for (const auto& w : words) ++token_counts[statement_token(w)];
    for (const auto& t : tagger.tag(words)) ++tag_counts[t];
    for (const auto& ch : utf8_chars(citation_text(r.citation))) ++char_counts[ch];
    ++section_counts[r.section_path];
  }
  Vocabulary v;
  v.config = cfg;
  v.tokens = with_reserved(ranked(token_counts, cfg.min_count, SIZE_MAX));
  v.chars = with_reserved(ranked(char_counts, 1, SIZE_MAX));
  v.pos_tags = ranked(tag_counts, 1, cfg.pos_top);
  v.sections = ranked(section_counts, 1, cfg.sections_top);
  v.reindex();
  return v;
}

FeatureVector featurize(const CitationRecord& r, const Vocabulary& v, const PosTagger& tagger) {
  const auto& cfg = v.config;
  FeatureVector fv;
  for (const auto& ch : utf8_chars(citation_text(r.citation))) fv.char_ids.push_back(v.char_id(ch));

  const auto words = statement_words(r, cfg.max_statement_words);
  for (const auto& w : words) {
    const auto tok = statement_token(w);
    const int id = v.token_id(tok);
    fv.token_ids.push_back(id);
    fv.subword_ids.push_back(id == kUnkId ? subword_buckets(tok, cfg) : std::vector<int>{});
  }

  fv.pos_counts.assign(cfg.pos_top, 0);
  for (const auto& t : tagger.tag(words))
    if (auto it = v.pos_index.find(t); it != v.pos_index.end()) ++fv.pos_counts[static_cast<std::size_t>(it->second)];

  fv.section_onehot.assign(cfg.sections_top, 0);
  if (auto it = v.section_index.find(r.section_path); it != v.section_index.end())
    fv.section_onehot[static_cast<std::size_t>(it->second)] = 1;

  fv.order_scalar = r.page_citation_count > 0
                        ? static_cast<double>(r.order_index) / static_cast<double>(r.page_citation_count)
                        : 0.0;
  fv.totwords_scalar = std::log1p(static_cast<double>(r.page_total_words));
  return fv;
}

}  // namespace wikicite
