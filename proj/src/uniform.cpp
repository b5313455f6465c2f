#include "wikicite/uniform.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <unordered_set>

#include "wikicite/log.hpp"

namespace wikicite {

namespace {

constexpr std::array<std::string_view, kIdKindCount> kIdNames = {
    "DOI", "ISBN", "PMC", "PMID", "ARXIV", "OCLC", "ISSN", "BIBCODE",
    "JSTOR", "LCCN", "MR", "OL", "OSTI", "SSRN", "ZBL"};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
           return std::isdigit(static_cast<unsigned char>(c));
         });
}

std::string strip_prefix_icase(std::string_view s, std::initializer_list<std::string_view> prefixes) {
  bool again = true;
  while (again) {
    again = false;
    s = text::trim(s);
    for (auto p : prefixes) {
      if (text::istarts_with(s, p)) {
        s.remove_prefix(p.size());
        again = true;
      }
    }
  }
  return std::string(text::trim(s));
}

std::string without_chars(std::string_view s, std::string_view drop) {
  std::string out;
  for (char c : s)
    if (drop.find(c) == std::string_view::npos) out.push_back(c);
  return out;
}

IdResult reject(std::string reason) { return {std::nullopt, std::move(reason)}; }
IdResult accept(std::string value) { return {std::move(value), {}}; }

IdResult normalize_isbn(std::string_view raw) {
  std::string s = strip_prefix_icase(raw, {"isbn-13", "isbn-10", "isbn13", "isbn10", "isbn", ":"});
  s = text::upper(without_chars(s, "- "));
  if (s.size() == 10) {
    int sum = 0;
    for (int i = 0; i < 10; ++i) {
      const char c = s[static_cast<std::size_t>(i)];
      int d;
      if (std::isdigit(static_cast<unsigned char>(c))) d = c - '0';
      else if (c == 'X' && i == 9) d = 10;
      else return reject("ISBN-10 has a non-digit character");
      sum += d * (10 - i);
    }
    if (sum % 11 != 0) return reject("ISBN-10 checksum mismatch");
    return accept(s);
  }
  if (s.size() == 13) {
    if (!all_digits(s)) return reject("ISBN-13 has a non-digit character");
    int sum = 0;
    for (int i = 0; i < 13; ++i) sum += (s[static_cast<std::size_t>(i)] - '0') * (i % 2 == 0 ? 1 : 3);
    if (sum % 10 != 0) return reject("ISBN-13 checksum mismatch");
    return accept(s);
  }
  return reject("ISBN must have 10 or 13 digits");
}

IdResult normalize_issn(std::string_view raw) {
  std::string s = text::upper(without_chars(strip_prefix_icase(raw, {"issn", ":"}), "- "));
  if (s.size() != 8) return reject("ISSN must have 8 characters");
  int sum = 0;
  for (int i = 0; i < 8; ++i) {
    const char c = s[static_cast<std::size_t>(i)];
    int d;
    if (std::isdigit(static_cast<unsigned char>(c))) d = c - '0';
    else if (c == 'X' && i == 7) d = 10;
    else return reject("ISSN has a non-digit character");
    sum += d * (8 - i);
  }
  if (sum % 11 != 0) return reject("ISSN checksum mismatch");
  return accept(s.substr(0, 4) + "-" + s.substr(4));
}

IdResult digits_only(std::string_view raw, std::initializer_list<std::string_view> prefixes,
                     std::string_view kind) {
  std::string s = strip_prefix_icase(raw, prefixes);
  if (!all_digits(s)) return reject(std::string(kind) + " must be digits only");
  return accept(s);
}

IdResult token(std::string_view raw, std::string_view kind) {
  auto s = text::trim(raw);
  if (s.empty()) return reject(std::string(kind) + " is empty");
  if (std::any_of(s.begin(), s.end(), [](char c) { return text::is_space(c); }))
    return reject(std::string(kind) + " contains whitespace");
  return accept(std::string(s));
}

}  // namespace

std::string_view to_string(IdKind kind) { return kIdNames[static_cast<std::size_t>(kind)]; }

std::optional<IdKind> parse_id_kind(std::string_view name) {
  for (std::size_t i = 0; i < kIdNames.size(); ++i)
    if (text::iequals(kIdNames[i], name)) return static_cast<IdKind>(i);
  return std::nullopt;
}

std::array<IdKind, kIdKindCount> all_id_kinds() {
  std::array<IdKind, kIdKindCount> out{};
  for (std::size_t i = 0; i < kIdKindCount; ++i) out[i] = static_cast<IdKind>(i);
  return out;
}

IdResult normalize_identifier(IdKind kind, std::string_view raw) {
  if (text::trim(raw).empty()) return reject("empty value");
  switch (kind) {
    case IdKind::kDoi: {
      static const std::regex re(R"(^10\.[0-9]+(\.[0-9]+)*/\S+$)");
      std::string s = text::lower(strip_prefix_icase(
          raw, {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/",
                "doi.org/", "dx.doi.org/", "doi:"}));
      if (!std::regex_match(s, re)) return reject("DOI does not match 10.<registrant>/<suffix>");
      return accept(s);
    }
    case IdKind::kIsbn:
      return normalize_isbn(raw);
    case IdKind::kPmid: {
      if (text::istarts_with(text::trim(raw), "pmc")) return reject("PMC value under PMID");
      return digits_only(raw, {"pmid:", "pmid"}, "PMID");
    }
    case IdKind::kPmc:
      return digits_only(raw, {"pmcid:", "pmc"}, "PMC");
    case IdKind::kArxiv: {
      static const std::regex modern(R"(^[0-9]{4}\.[0-9]{4,5}(v[0-9]+)?$)");
      static const std::regex legacy(R"(^[a-z][a-z\-]*(\.[A-Za-z]{2})?/[0-9]{7}(v[0-9]+)?$)");
      std::string s = strip_prefix_icase(raw, {"arxiv:"});
      if (std::regex_match(s, modern) || std::regex_match(s, legacy)) return accept(s);
      return reject("arXiv id matches neither the old nor the new scheme");
    }
    case IdKind::kOclc:
      return digits_only(raw, {"(ocolc)", "ocm", "ocn", "on"}, "OCLC");
    case IdKind::kIssn:
      return normalize_issn(raw);
    case IdKind::kBibcode: {
      auto r = token(raw, "bibcode");
      if (r && r.value->size() != 19) return reject("bibcode must have 19 characters");
      return r;
    }
    case IdKind::kMr:
      return digits_only(raw, {"mr"}, "MR");
    case IdKind::kOl: {
      static const std::regex re(R"(^OL[0-9]+[AMW]$)");
      std::string s = text::upper(text::trim(raw));
      if (s.rfind("OL", 0) != 0) s = "OL" + s;
      if (!std::regex_match(s, re)) return reject("OL id must look like OL<digits>[AMW]");
      return accept(s);
    }
    case IdKind::kOsti:
      return digits_only(raw, {"osti"}, "OSTI");
    case IdKind::kSsrn:
      return digits_only(raw, {"ssrn"}, "SSRN");
    case IdKind::kLccn: {
      static const std::regex re(R"(^[a-z]{0,3}[0-9][0-9\-]*$)");
      std::string s = text::lower(without_chars(text::trim(raw), " "));
      if (!std::regex_match(s, re)) return reject("LCCN has an unexpected shape");
      return accept(s);
    }
    case IdKind::kZbl: {
      static const std::regex re(R"(^[0-9]{4}\.[0-9]{5}$|^[0-9]+$)");
      std::string s = strip_prefix_icase(raw, {"zbl"});
      if (!std::regex_match(s, re)) return reject("Zbl id has an unexpected shape");
      return accept(s);
    }
    case IdKind::kJstor:
      return token(raw, "JSTOR");
  }
  return reject("unknown identifier kind");
}

// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string_view> kTwoLevelSuffixes = {
    "co.uk", "org.uk", "ac.uk",  "gov.uk", "ltd.uk", "plc.uk", "me.uk",  "net.uk", "sch.uk",
    "com.au", "net.au", "org.au", "edu.au", "gov.au", "co.nz",  "org.nz", "net.nz", "govt.nz",
    "ac.nz",  "co.jp",  "ne.jp",  "or.jp",  "ac.jp",  "go.jp",  "co.in",  "net.in", "org.in",
    "gov.in", "ac.in",  "co.za",  "org.za", "gov.za", "ac.za",  "com.br", "gov.br", "org.br",
    "com.cn", "net.cn", "gov.cn", "org.cn", "edu.cn", "ac.cn",  "com.mx", "com.ar", "com.tr",
    "co.kr",  "or.kr",  "com.sg", "edu.sg", "gov.sg", "com.hk", "co.il",  "ac.il",  "com.my",
    "com.pk", "com.ng", "co.id"};

bool label_ok(std::string_view l) {
  return !l.empty() && std::all_of(l.begin(), l.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || static_cast<unsigned char>(c) >= 0x80;
  });
}

}  // namespace

std::string top_level_domain(std::string_view url) {
  std::string_view s = text::trim(url);
  if (s.empty() || std::any_of(s.begin(), s.end(), [](char c) { return text::is_space(c); }))
    return {};
  const std::string low = text::lower(s);
  std::string_view rest = low;
  if (auto p = rest.find("://"); p != std::string_view::npos) {
    const auto scheme = rest.substr(0, p);
    if (scheme.empty() || !std::all_of(scheme.begin(), scheme.end(), [](char c) {
          return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
        }))
      return {};
    rest.remove_prefix(p + 3);
  } else if (rest.substr(0, 2) == "//") {
    rest.remove_prefix(2);
  }
  auto host = rest.substr(0, rest.find_first_of("/?#"));
  if (auto at = host.rfind('@'); at != std::string_view::npos) host.remove_prefix(at + 1);
  if (auto colon = host.find(':'); colon != std::string_view::npos) host = host.substr(0, colon);
  while (!host.empty() && host.back() == '.') host.remove_suffix(1);
  auto labels = text::split(host, '.');
  if (labels.size() < 2) return {};
  for (auto l : labels)
    if (!label_ok(l)) return {};
  const auto tld = labels.back();
  if (tld.size() < 2 || !std::all_of(tld.begin(), tld.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
      }))
    return {};
  const std::size_t n = labels.size();
  std::string last2 = std::string(labels[n - 2]) + "." + std::string(labels[n - 1]);
  if (kTwoLevelSuffixes.count(last2)) return n >= 3 ? std::string(labels[n - 3]) : std::string();
  return std::string(labels[n - 2]);
}

std::optional<int> publication_year(const UniformCitation& c) {
  auto scan = [](std::string_view s) -> std::optional<int> {
    for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
      if (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) continue;
      if (!all_digits(s.substr(i, 4))) continue;
      if (i + 4 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 4]))) continue;
      const int y = std::stoi(std::string(s.substr(i, 4)));
      if (y >= 1000 && y <= 2030) return y;
    }
    return std::nullopt;
  };
  if (auto y = scan(c.year)) return y;
  return scan(c.date);
}

// ---------------------------------------------------------------------------

std::string Author::display() const {
  if (!raw.empty()) return raw;
  if (first.empty()) return last;
  if (last.empty()) return first;
  return first + " " + last;
}

namespace {

template <typename Self>
auto* text_field_impl(Self& c, std::string_view key) {
  using Ptr = decltype(&c.title);
  static const std::array<std::pair<std::string_view, std::string UniformCitation::*>, 27> kFields = {{
      {"type", &UniformCitation::type},
      {"title", &UniformCitation::title},
      {"periodical", &UniformCitation::periodical},
      {"chapter", &UniformCitation::chapter},
      {"publisher", &UniformCitation::publisher},
      {"edition", &UniformCitation::edition},
      {"publication_place", &UniformCitation::publication_place},
      {"date", &UniformCitation::date},
      {"year", &UniformCitation::year},
      {"access_date", &UniformCitation::access_date},
      {"archive_url", &UniformCitation::archive_url},
      {"archive_date", &UniformCitation::archive_date},
      {"volume", &UniformCitation::volume},
      {"issue", &UniformCitation::issue},
      {"pages", &UniformCitation::pages},
      {"url", &UniformCitation::url},
      {"url_top_level_domain", &UniformCitation::url_top_level_domain},
      {"work", &UniformCitation::work},
      {"website", &UniformCitation::website},
      {"newspaper", &UniformCitation::newspaper},
      {"series", &UniformCitation::series},
      {"language", &UniformCitation::language},
      {"degree", &UniformCitation::degree},
      {"conference", &UniformCitation::conference},
      {"encyclopedia", &UniformCitation::encyclopedia},
      {"quote", &UniformCitation::quote},
      {"trans_title", &UniformCitation::trans_title},
  }};
  for (const auto& [name, member] : kFields)
    if (name == key) return static_cast<Ptr>(&(c.*member));
  return static_cast<Ptr>(nullptr);
}

}  // namespace

std::string* UniformCitation::text_field(std::string_view key) { return text_field_impl(*this, key); }
const std::string* UniformCitation::text_field(std::string_view key) const {
  return text_field_impl(*this, key);
}

nlohmann::ordered_json to_json(const UniformCitation& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto key : kUniformKeys) {
    if (key == "authors") {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& a : c.authors) {
        if (!a.raw.empty()) arr.push_back(a.raw);
        else arr.push_back({{"first", a.first}, {"last", a.last}});
      }
      j["authors"] = std::move(arr);
    } else if (key == "id_list") {
      auto ids = nlohmann::ordered_json::object();
      for (const auto& [kind, value] : c.id_list) ids[std::string(to_string(kind))] = value;
      j["id_list"] = std::move(ids);
    } else {
      j[std::string(key)] = *c.text_field(key);
    }
  }
  return j;
}

UniformCitation uniform_from_json(const nlohmann::json& j) {
  UniformCitation c;
  for (auto key : kUniformKeys) {
    const std::string k(key);
    if (!j.contains(k)) continue;
    if (key == "authors") {
      for (const auto& a : j[k]) {
        if (a.is_string()) c.authors.push_back({a.get<std::string>(), {}, {}});
        else c.authors.push_back({{}, a.value("first", ""), a.value("last", "")});
      }
    } else if (key == "id_list") {
      for (const auto& [kind, value] : j[k].items()) {
        auto parsed = parse_id_kind(kind);
        if (!parsed) throw UserError("unknown identifier kind in record: " + kind);
        c.id_list[*parsed] = value.get<std::string>();
      }
    } else {
      *c.text_field(key) = j[k].get<std::string>();
    }
  }
  return c;
}

nlohmann::ordered_json to_json(const CitationRecord& r) {
  nlohmann::ordered_json j;
  j["page_id"] = r.page_id;
  j["page_title"] = r.page_title;
  j["section_path"] = r.section_path;
  j["order_index"] = r.order_index;
  j["preceding_words"] = r.preceding_words;
  j["page_total_words"] = r.page_total_words;
  j["page_citation_count"] = r.page_citation_count;
  j["template_text"] = r.template_text;
  j["citation"] = to_json(r.citation);
  return j;
}

CitationRecord record_from_json(const nlohmann::json& j) {
  CitationRecord r;
  r.page_id = j.at("page_id").get<std::int64_t>();
  r.page_title = j.at("page_title").get<std::string>();
  r.section_path = j.at("section_path").get<std::string>();
  r.order_index = j.at("order_index").get<int>();
  r.preceding_words = j.at("preceding_words").get<std::vector<std::string>>();
  r.page_total_words = j.at("page_total_words").get<std::size_t>();
  r.page_citation_count = j.at("page_citation_count").get<std::size_t>();
  r.template_text = j.value("template_text", "");
  r.citation = uniform_from_json(j.at("citation"));
  return r;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string csv_header() {
  std::string out;
  for (auto key : kUniformKeys) {
    out += key;
    out += ',';
  }
  out += "page_id,page_title,section_path,order_index,preceding_words,page_total_words";
  return out;
}

std::string to_csv_row(const CitationRecord& r) {
  std::string out;
  const auto& c = r.citation;
  for (auto key : kUniformKeys) {
    if (key == "authors") {
      std::vector<std::string> names;
      for (const auto& a : c.authors) names.push_back(a.display());
      out += csv_escape(text::join(names, "; "));
    } else if (key == "id_list") {
      std::vector<std::string> ids;
      for (const auto& [kind, value] : c.id_list) ids.push_back(std::string(to_string(kind)) + ":" + value);
      out += csv_escape(text::join(ids, "; "));
    } else {
      out += csv_escape(*c.text_field(key));
    }
    out += ',';
  }
  out += std::to_string(r.page_id) + ',' + csv_escape(r.page_title) + ',' +
         csv_escape(r.section_path) + ',' + std::to_string(r.order_index) + ',' +
         csv_escape(text::join(r.preceding_words, " ")) + ',' + std::to_string(r.page_total_words);
  return out;
}

// ---------------------------------------------------------------------------
// Alias tables

std::string AliasTable::normalize_param(std::string_view raw) {
  std::string s = text::lower(text::trim(raw));
  for (auto& c : s)
    if (c == '_' || c == ' ') c = '-';
  return s;
}

void AliasTable::add_rules(Rules& rules, std::string_view tsv) {
  for (auto line : text::split(tsv, '\n')) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto words = text::split_words(line);
    if (words.size() != 2) throw UserError("bad alias line: " + std::string(line));
    const std::string param = normalize_param(words[0]);
    const std::string& target = words[1];
    if (auto pos = param.find('#'); pos != std::string::npos)
      rules.numbered.push_back({param.substr(0, pos), param.substr(pos + 1), target});
    else
      rules.exact[param] = target;
  }
}

std::optional<AliasTarget> AliasTable::match(const Rules& rules, std::string_view param) {
  if (auto it = rules.exact.find(param); it != rules.exact.end()) return AliasTarget{it->second, 1};
  for (const auto& n : rules.numbered) {
    if (param.size() <= n.prefix.size() + n.suffix.size()) continue;
    if (param.substr(0, n.prefix.size()) != n.prefix) continue;
    if (param.substr(param.size() - n.suffix.size()) != n.suffix) continue;
    auto digits = param.substr(n.prefix.size(), param.size() - n.prefix.size() - n.suffix.size());
    if (!all_digits(digits) || digits.size() > 3) continue;
    return AliasTarget{n.target, std::stoi(std::string(digits))};
  }
  return std::nullopt;
}

AliasTable AliasTable::parse(std::string_view common_tsv,
                             const std::map<std::string, std::string>& per_template_tsv) {
  AliasTable t;
  add_rules(t.common_, common_tsv);
  for (const auto& [name, tsv] : per_template_tsv) add_rules(t.per_template_[name], tsv);
  return t;
}

AliasTable AliasTable::load_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> per;
  std::string common;
  if (!std::filesystem::is_directory(dir)) throw UserError("alias directory missing: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".tsv") continue;
    const auto stem = entry.path().stem().string();
    if (stem == "common") {
      common = read_file(entry.path());
    } else {
      std::string name = stem;
      std::replace(name.begin(), name.end(), '_', ' ');
      per[normalize_template_name(name)] = read_file(entry.path());
    }
  }
  if (common.empty()) throw UserError("alias directory has no common.tsv: " + dir.string());
  return parse(common, per);
}

std::optional<AliasTarget> AliasTable::lookup(std::string_view template_class,
                                              std::string_view param) const {
  const std::string key = normalize_param(param);
  if (auto it = per_template_.find(template_class); it != per_template_.end())
    if (auto hit = match(it->second, key)) return hit;
  return match(common_, key);
}

void MapStats::merge(const MapStats& o) {
  mapped += o.mapped;
  dropped_params += o.dropped_params;
  rejected_ids += o.rejected_ids;
  unknown_kind_ids += o.unknown_kind_ids;
  extra_id_values += o.extra_id_values;
}

// ---------------------------------------------------------------------------

std::string clean_value(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    if (v.compare(i, 2, "[[") == 0) {
      const auto close = v.find("]]", i + 2);
      if (close != std::string_view::npos) {
        auto inner = v.substr(i + 2, close - i - 2);
        if (inner.find("{{") == std::string_view::npos) {
          const auto pipe = inner.rfind('|');
          out.append(pipe == std::string_view::npos ? inner : inner.substr(pipe + 1));
          i = close + 2;
          continue;
        }
      }
    }
    if (v[i] == '\'' && i + 1 < v.size() && v[i + 1] == '\'') {
      while (i < v.size() && v[i] == '\'') ++i;
      continue;
    }
    out.push_back(v[i++]);
  }
  return text::collapse_whitespace(out);
}

namespace {

const std::unordered_set<std::string_view> kOtherIdentifierParams = {
    "id", "asin", "hdl", "citeseerx", "biorxiv", "s2cid", "eissn", "ismn", "rfc", "sbn", "medrxiv", "asin-tld"};

}  // namespace

UniformCitation map_to_uniform(const TemplateCall& call, const TemplateRegistry& registry,
                               const AliasTable& aliases, MapStats* stats) {
  if (!registry.contains(call.name)) throw UnsupportedTemplate("unsupported template: " + call.name);
  MapStats local;
  MapStats& st = stats ? *stats : local;

  UniformCitation c;
  c.type = registry.canonical(call.name);
  std::map<int, Author> authors;
  st.dropped_params += call.positional_params.size();

  for (const auto& [raw_key, raw_value] : call.named_params) {
    std::string value = clean_value(raw_value);
    if (value.empty()) continue;
    auto target = aliases.lookup(c.type, raw_key);
    if (!target) {
      if (kOtherIdentifierParams.count(AliasTable::normalize_param(raw_key))) ++st.unknown_kind_ids;
      else ++st.dropped_params;
      continue;
    }
    const std::string& key = target->key;
    if (key.rfind("authors.", 0) == 0) {
      Author& a = authors[target->index];
      std::string* slot = key == "authors.raw" ? &a.raw : key == "authors.first" ? &a.first : &a.last;
      if (slot->empty()) *slot = std::move(value);
      continue;
    }
    if (key.rfind("id.", 0) == 0) {
      auto kind = parse_id_kind(std::string_view(key).substr(3));
      if (!kind) throw UserError("alias table names unknown identifier kind: " + key);
      if (c.id_list.count(*kind)) {
        ++st.extra_id_values;
        continue;
      }
      // DOIs may legitimately contain ',' and ';', so only other kinds are split as lists.
      std::vector<std::string_view> pieces{value};
      if (*kind != IdKind::kDoi) {
        pieces = text::split(value, value.find(';') != std::string::npos ? ';' : ',');
        std::erase_if(pieces, [](std::string_view p) { return text::trim(p).empty(); });
        if (pieces.empty()) pieces.push_back(value);
      }
      std::string_view first = pieces.front();
      st.extra_id_values += pieces.size() - 1;
      if (pieces.size() > 1)
        log::get().debug("event=extra_identifier_values kind={} kept={}", to_string(*kind), first);
      auto norm = normalize_identifier(*kind, first);
      if (!norm) {
        ++st.rejected_ids;
        log::get().debug("event=identifier_rejected kind={} value=\"{}\" reason=\"{}\"",
                         to_string(*kind), first, norm.reason);
        continue;
      }
      c.id_list[*kind] = *norm.value;
      continue;
    }
    std::string* field = c.text_field(key);
    if (!field) throw UserError("alias table names unknown uniform key: " + key);
    if (field->empty()) *field = std::move(value);
  }
  for (auto& [idx, a] : authors)
    if (!a.empty()) c.authors.push_back(std::move(a));
  c.url_top_level_domain = top_level_domain(c.url);
  ++st.mapped;
  return c;
}

CitationRecord make_record(const RawCitation& raw, const TemplateRegistry& registry,
                           const AliasTable& aliases, MapStats* stats) {
  CitationRecord r;
  r.citation = map_to_uniform(raw.call, registry, aliases, stats);
  r.page_id = raw.page_id;
  r.page_title = raw.page_title;
  r.section_path = raw.section_path;
  r.order_index = raw.order_index;
  r.preceding_words = raw.preceding_words;
  r.page_total_words = raw.page_total_words;
  r.page_citation_count = raw.page_citation_count;
  r.template_text = raw.call.serialize();
  return r;
}

}  // namespace wikicite
