#include "wikicite/wikicode.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace wikicite {

namespace {

constexpr auto npos = std::string_view::npos;

bool is_name_terminator(char c) {
  return c == '>' || c == '/' || text::is_space(c);
}

struct OpenTag {
  std::size_t end;  // one past '>'
  bool self_closing;
};

// Matches `<name ...>` or `<name .../>` at `i`. `lt` is the lowercased text.
std::optional<OpenTag> open_tag_at(std::string_view lt, std::size_t i, std::string_view name) {
  if (i + 1 + name.size() >= lt.size() || lt[i] != '<') return std::nullopt;
  if (lt.compare(i + 1, name.size(), name) != 0) return std::nullopt;
  if (!is_name_terminator(lt[i + 1 + name.size()])) return std::nullopt;
  const auto gt = lt.find('>', i + 1 + name.size());
  if (gt == npos) return std::nullopt;
  const auto lt_pos = lt.find('<', i + 1);
  if (lt_pos < gt) return std::nullopt;
  return OpenTag{gt + 1, lt[gt - 1] == '/'};
}

// Finds `</name>` (spaces allowed before '>') at or after `from`; returns [start, end).
std::optional<Span> find_close_tag(std::string_view lt, std::size_t from, std::string_view name) {
  std::string needle = "</";
  needle += name;
  for (auto p = lt.find(needle, from); p != npos; p = lt.find(needle, p + 1)) {
    auto q = p + needle.size();
    while (q < lt.size() && text::is_space(lt[q])) ++q;
    if (q < lt.size() && lt[q] == '>') return Span{p, q + 1};
  }
  return std::nullopt;
}

// End of the opaque region (comment, nowiki, pre) opening at `i`, or npos.
std::size_t opaque_end(std::string_view lt, std::size_t i) {
  if (lt[i] != '<') return npos;
  if (lt.compare(i, 4, "<!--") == 0) {
    const auto e = lt.find("-->", i + 4);
    return e == npos ? lt.size() : e + 3;
  }
  for (std::string_view name : {std::string_view("nowiki"), std::string_view("pre")}) {
    if (auto tag = open_tag_at(lt, i, name)) {
      if (tag->self_closing) return tag->end;
      if (auto close = find_close_tag(lt, tag->end, name)) return close->end;
      return npos;
    }
  }
  return npos;
}

// Matched "{{" ... "}}" pairs over the whole text, innermost-first.
std::vector<Span> match_braces(std::string_view t, std::string_view lt) {
  std::vector<std::size_t> stack;
  std::vector<Span> pairs;
  for (std::size_t i = 0; i < t.size();) {
    const char c = t[i];
    if (c == '<') {
      const auto e = opaque_end(lt, i);
      i = e == npos ? i + 1 : e;
      continue;
    }
    if (c == '{' && i + 1 < t.size() && t[i + 1] == '{') {
      stack.push_back(i);
      i += 2;
      continue;
    }
    if (c == '}' && i + 1 < t.size() && t[i + 1] == '}') {
      if (!stack.empty()) {
        pairs.push_back({stack.back(), i + 2});
        stack.pop_back();
      }
      i += 2;
      continue;
    }
    ++i;
  }
  return pairs;
}

std::string remove_comments(std::string_view s) {
  const std::string ls = text::lower(s);
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '<') {
      if (ls.compare(i, 4, "<!--") == 0) {
        const auto e = ls.find("-->", i + 4);
        i = e == npos ? s.size() : e + 3;
        continue;
      }
      const auto e = opaque_end(ls, i);
      if (e != npos) {
        out.append(s.substr(i, e - i));
        i = e;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TemplateCall

const std::string* TemplateCall::find(std::string_view key) const {
  const std::string* hit = nullptr;
  for (const auto& [k, v] : named_params)
    if (text::iequals(text::trim(k), key)) hit = &v;
  return hit;
}

std::string TemplateCall::serialize() const {
  // A trailing '}' would fuse with the closing braces on reparse; an empty comment
  // keeps them apart and is dropped again by the parser.
  auto guard = [](const std::string& v) {
    return !v.empty() && v.back() == '}' ? v + "<!---->" : v;
  };
  std::string out = "{{" + guard(name);
  for (const auto& p : positional_params) out += "|" + guard(p);
  for (const auto& [k, v] : named_params) out += "|" + k + "=" + guard(v);
  out += "}}";
  return out;
}

std::string normalize_template_name(std::string_view raw) {
  std::string s(raw);
  std::replace(s.begin(), s.end(), '_', ' ');
  s = text::fold(s);
  if (text::istarts_with(s, "template:")) s = std::string(text::trim(std::string_view(s).substr(9)));
  return s;
}

std::optional<TemplateCall> parse_template_call(std::string_view call, Span span) {
  if (call.size() < 4 || call.substr(0, 2) != "{{" || call.substr(call.size() - 2) != "}}")
    return std::nullopt;
  const std::string_view inner = call.substr(2, call.size() - 4);
  const std::string lin = text::lower(inner);

  struct Part {
    std::size_t begin, end, eq;
  };
  std::vector<Part> parts;
  int braces = 0, links = 0;
  std::size_t start = 0, eq = npos;
  for (std::size_t j = 0; j <= inner.size();) {
    if (j == inner.size()) {
      parts.push_back({start, j, eq});
      break;
    }
    const char c = inner[j];
    if (c == '<') {
      const auto e = opaque_end(lin, j);
      if (e != npos) {
        j = e;
        continue;
      }
    }
    const bool two = j + 1 < inner.size() && inner[j + 1] == c;
    if (c == '{' && two) {
      ++braces;
      j += 2;
      continue;
    }
    if (c == '}' && two) {
      if (braces > 0) --braces;
      j += 2;
      continue;
    }
    if (c == '[' && two) {
      ++links;
      j += 2;
      continue;
    }
    if (c == ']' && two) {
      if (links > 0) --links;
      j += 2;
      continue;
    }
    if (braces == 0 && links == 0) {
      if (c == '|') {
        parts.push_back({start, j, eq});
        start = j + 1;
        eq = npos;
      } else if (c == '=' && eq == npos) {
        eq = j;
      }
    }
    ++j;
  }

  TemplateCall out;
  out.source_span = span;
  out.name = normalize_template_name(remove_comments(inner.substr(parts[0].begin, parts[0].end - parts[0].begin)));
  if (out.name.empty()) return std::nullopt;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (p.eq != npos) {
      std::string key(text::trim(remove_comments(inner.substr(p.begin, p.eq - p.begin))));
      std::string value(text::trim(remove_comments(inner.substr(p.eq + 1, p.end - p.eq - 1))));
      out.named_params.emplace_back(std::move(key), std::move(value));
    } else {
      out.positional_params.push_back(remove_comments(inner.substr(p.begin, p.end - p.begin)));
    }
  }
  return out;
}

std::vector<TemplateCall> tokenize_templates(std::string_view wikitext, std::size_t base_offset) {
  const std::string lt = text::lower(wikitext);
  auto pairs = match_braces(wikitext, lt);
  std::sort(pairs.begin(), pairs.end(),
            [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::vector<TemplateCall> calls;
  std::size_t covered = 0;
  for (const auto& p : pairs) {
    if (p.begin < covered) continue;
    covered = p.end;
    if (auto call = parse_template_call(wikitext.substr(p.begin, p.size()),
                                        {p.begin + base_offset, p.end + base_offset}))
      calls.push_back(std::move(*call));
  }
  return calls;
}

// ---------------------------------------------------------------------------
// TemplateRegistry

TemplateRegistry TemplateRegistry::parse(std::string_view config_text) {
  TemplateRegistry reg;
  for (auto line : text::split(config_text, '\n')) {
    if (auto hash = line.find('#'); hash != npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == npos) {
      auto name = normalize_template_name(line);
      reg.canonical_.emplace(name, name);
    } else {
      auto alias = normalize_template_name(line.substr(0, eq));
      auto target = normalize_template_name(line.substr(eq + 1));
      if (alias.empty() || target.empty())
        throw UserError("bad template alias line: " + std::string(line));
      reg.canonical_[alias] = target;
    }
  }
  return reg;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& path) {
  auto reg = parse(read_file(path));
  if (reg.size() == 0) throw UserError("template list " + path.string() + " is empty");
  return reg;
}

bool TemplateRegistry::contains(std::string_view name) const {
  return canonical_.find(name) != canonical_.end();
}

std::string TemplateRegistry::canonical(std::string_view name) const {
  auto it = canonical_.find(name);
  return it == canonical_.end() ? std::string(name) : it->second;
}

std::vector<std::string> TemplateRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : canonical_) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------
// Markup stripping

namespace {

const std::unordered_set<std::string_view> kDropWholeTags = {
    "gallery", "references", "math", "timeline", "score", "syntaxhighlight", "source",
    "graph", "mapframe", "templatedata", "imagemap", "hiero", "chem", "ce", "templatestyles"};

const std::unordered_set<std::string_view> kBlockTags = {
    "br", "p", "div", "li", "ul", "ol", "table", "tr", "td", "th", "hr", "blockquote", "center", "dl", "dd", "dt"};

constexpr std::array<std::string_view, 7> kUrlSchemes = {"http://", "https://", "ftp://", "//",
                                                         "mailto:", "news:", "irc://"};

class Stripper {
public:
  explicit Stripper(std::string_view t) : t_(t), lt_(text::lower(t)) {
    for (const auto& p : match_braces(t_, lt_)) brace_end_[p.begin] = p.end;
  }

  PageText run() {
    process(0, t_.size(), true);
    PageText out;
    out.headings = std::move(headings_);
    std::size_t i = 0;
    while (i < plain_.size()) {
      while (i < plain_.size() && text::is_space(plain_[i])) ++i;
      std::size_t j = i;
      while (j < plain_.size() && !text::is_space(plain_[j])) ++j;
      if (j > i) out.words.push_back({plain_.substr(i, j - i), src_[i]});
      i = j;
    }
    return out;
  }

private:
  void emit(char c, std::size_t off) {
    plain_.push_back(c);
    src_.push_back(off);
  }
  void boundary() {
    if (!plain_.empty() && plain_.back() != ' ') emit(' ', npos);
  }

  std::size_t line_end(std::size_t i, std::size_t e) const {
    const auto p = t_.find('\n', i);
    return p == npos || p > e ? e : p;
  }

  // Returns the position after a construct handled at a line start, or npos.
  std::size_t line_start(std::size_t i, std::size_t e) {
    const std::size_t le = line_end(i, e);
    std::string_view line = t_.substr(i, le - i);
    // Heading: "== Title ==".
    auto rtrimmed = line;
    while (!rtrimmed.empty() && text::is_space(rtrimmed.back())) rtrimmed.remove_suffix(1);
    if (rtrimmed.size() >= 3 && rtrimmed.front() == '=' && rtrimmed.back() == '=') {
      std::size_t lead = 0, trail = 0;
      while (lead < rtrimmed.size() && rtrimmed[lead] == '=') ++lead;
      while (trail < rtrimmed.size() && rtrimmed[rtrimmed.size() - 1 - trail] == '=') ++trail;
      const std::size_t level = std::min({lead, trail, std::size_t{6}});
      if (2 * level < rtrimmed.size()) {
        auto inner = rtrimmed.substr(level, rtrimmed.size() - 2 * level);
        Stripper sub(inner);
        auto words = sub.run().words;
        std::vector<std::string> parts;
        for (auto& w : words) parts.push_back(std::move(w.text));
        std::string title = parts.empty() ? std::string(text::trim(inner)) : text::join(parts, " ");
        if (!title.empty()) {
          headings_.push_back({std::move(title), static_cast<int>(level), i});
          boundary();
          return le;
        }
      }
    }
    // Table: dropped wholesale, nested tables included.
    auto lstripped = text::trim(line);
    if (lstripped.substr(0, 2) == "{|") {
      int depth = 1;
      std::size_t pos = le;
      while (pos < e) {
        const std::size_t ls = pos + 1;
        if (ls >= e) {
          pos = e;
          break;
        }
        const std::size_t next = line_end(ls, e);
        auto l = text::trim(t_.substr(ls, next - ls));
        if (l.substr(0, 2) == "{|") ++depth;
        if (l.substr(0, 2) == "|}" && --depth == 0) {
          pos = next;
          break;
        }
        pos = next;
      }
      boundary();
      return pos;
    }
    return npos;
  }

  void process(std::size_t b, std::size_t e, bool line_mode) {
    std::size_t i = b;
    while (i < e) {
      if (line_mode && (i == 0 || t_[i - 1] == '\n')) {
        const auto skip = line_start(i, e);
        if (skip != npos) {
          i = skip;
          continue;
        }
        while (i < e && (t_[i] == '*' || t_[i] == '#' || t_[i] == ':' || t_[i] == ';')) ++i;
        if (t_.compare(i, 4, "----") == 0) {
          while (i < e && t_[i] == '-') ++i;
        }
        if (i >= e) break;
      }
      const char c = t_[i];
      if (c == '<') {
        i = tag(i, e);
        continue;
      }
      if (c == '{' && i + 1 < e && t_[i + 1] == '{') {
        auto it = brace_end_.find(i);
        if (it != brace_end_.end() && it->second <= e) {
          boundary();
          i = it->second;
          continue;
        }
      }
      if (c == '[' && i + 1 < e && t_[i + 1] == '[') {
        if (auto n = wikilink(i, e); n != npos) {
          i = n;
          continue;
        }
      }
      if (c == '[') {
        if (auto n = external_link(i, e); n != npos) {
          i = n;
          continue;
        }
      }
      if (c == '\'' && i + 1 < e && t_[i + 1] == '\'') {
        while (i < e && t_[i] == '\'') ++i;
        continue;
      }
      if (c == '_' && t_.compare(i, 2, "__") == 0) {
        std::size_t j = i + 2;
        while (j < e && std::isupper(static_cast<unsigned char>(t_[j]))) ++j;
        if (j > i + 2 && t_.compare(j, 2, "__") == 0) {
          i = j + 2;
          continue;
        }
      }
      emit(text::is_space(c) ? ' ' : c, i);
      ++i;
    }
  }

  std::size_t tag(std::size_t i, std::size_t e) {
    if (lt_.compare(i, 4, "<!--") == 0) {
      const auto end = lt_.find("-->", i + 4);
      return end == npos || end + 3 > e ? e : end + 3;
    }
    if (auto open = open_tag_at(lt_, i, "ref")) {
      boundary();
      if (open->self_closing) return open->end;
      auto close = find_close_tag(lt_, open->end, "ref");
      return close && close->end <= e ? close->end : e;
    }
    for (std::string_view name : {std::string_view("nowiki"), std::string_view("pre")}) {
      if (auto open = open_tag_at(lt_, i, name)) {
        if (open->self_closing) return open->end;
        auto close = find_close_tag(lt_, open->end, name);
        if (!close || close->end > e) break;
        for (std::size_t k = open->end; k < close->begin; ++k)
          emit(text::is_space(t_[k]) ? ' ' : t_[k], k);
        return close->end;
      }
    }
    // Generic tag: <name ...> or </name>.
    std::size_t j = i + 1;
    if (j < e && t_[j] == '/') ++j;
    const std::size_t name_begin = j;
    while (j < e && std::isalnum(static_cast<unsigned char>(t_[j]))) ++j;
    if (j > name_begin) {
      const auto gt = t_.find('>', j);
      const auto next_lt = t_.find('<', j);
      if (gt != npos && gt < e && (next_lt == npos || gt < next_lt)) {
        const std::string name = text::lower(t_.substr(name_begin, j - name_begin));
        if (kDropWholeTags.count(name) && t_[i + 1] != '/' && t_[gt - 1] != '/') {
          auto close = find_close_tag(lt_, gt + 1, name);
          boundary();
          return close && close->end <= e ? close->end : gt + 1;
        }
        if (kBlockTags.count(name)) boundary();
        return gt + 1;
      }
    }
    emit('<', i);
    return i + 1;
  }

  std::size_t wikilink(std::size_t i, std::size_t e) {
    int depth = 0;
    std::size_t j = i;
    std::size_t close = npos;
    while (j + 1 < e) {
      if (t_[j] == '[' && t_[j + 1] == '[') {
        ++depth;
        j += 2;
      } else if (t_[j] == ']' && t_[j + 1] == ']') {
        if (--depth == 0) {
          close = j;
          break;
        }
        j += 2;
      } else {
        ++j;
      }
    }
    if (close == npos) return npos;
    const std::size_t ib = i + 2;
    const auto pipe = t_.substr(ib, close - ib).find('|');
    std::string target = text::lower(text::trim(t_.substr(ib, pipe == npos ? close - ib : pipe)));
    if (!target.empty() && target.front() == ':') target.erase(0, 1);
    for (std::string_view ns : {"file:", "image:", "category:", "media:"}) {
      if (target.rfind(ns, 0) == 0) {
        boundary();
        return close + 2;
      }
    }
    if (pipe == npos)
      process(ib, close, false);
    else
      process(ib + pipe + 1, close, false);
    return close + 2;
  }

  std::size_t external_link(std::size_t i, std::size_t e) {
    bool url = false;
    for (auto scheme : kUrlSchemes)
      if (lt_.compare(i + 1, scheme.size(), scheme) == 0) url = true;
    if (!url) return npos;
    const std::size_t le = line_end(i, e);
    const auto close = t_.substr(i, le - i).find(']');
    if (close == npos) return npos;
    const std::size_t end = i + close;
    const auto space = t_.substr(i, end - i).find(' ');
    if (space != npos) process(i + space + 1, end, false);
    boundary();
    return end + 1;
  }

  std::string_view t_;
  std::string lt_;
  std::unordered_map<std::size_t, std::size_t> brace_end_;
  std::string plain_;
  std::vector<std::size_t> src_;
  std::vector<PageText::Heading> headings_;
};

}  // namespace

PageText strip_markup(std::string_view wikitext) { return Stripper(wikitext).run(); }

std::vector<std::string> PageText::words_before(std::size_t offset, std::size_t max_words) const {
  auto it = std::lower_bound(words.begin(), words.end(), offset,
                             [](const Word& w, std::size_t off) { return w.offset < off; });
  const auto n = static_cast<std::size_t>(it - words.begin());
  const std::size_t first = n > max_words ? n - max_words : 0;
  std::vector<std::string> out;
  out.reserve(n - first);
  for (std::size_t k = first; k < n; ++k) out.push_back(words[k].text);
  return out;
}

std::string PageText::section_at(std::size_t offset) const {
  auto it = std::lower_bound(headings.begin(), headings.end(), offset,
                             [](const Heading& h, std::size_t off) { return h.offset < off; });
  if (it == headings.begin()) return "LEAD";
  return std::prev(it)->title;
}

TextContext plain_text_context(std::string_view wikitext, Span span, std::size_t max_words) {
  const auto page = strip_markup(wikitext);
  return {page.words_before(span.begin, max_words), page.section_at(span.begin)};
}

// ---------------------------------------------------------------------------
// Citation extraction

namespace {

constexpr std::array<std::string_view, 16> kIdentifierParams = {
    "doi", "isbn", "pmid", "pmc", "arxiv", "eprint", "oclc", "issn",
    "bibcode", "jstor", "lccn", "mr", "ol", "osti", "ssrn", "zbl"};

struct RefBlock {
  Span content;
  std::string name;
};

std::string ref_name(std::string_view attrs) {
  static const std::regex re(R"re(\bname\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s/>]+)))re",
                             std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(attrs.begin(), attrs.end(), m, re)) return {};
  for (int g = 1; g <= 3; ++g)
    if (m[g].matched) return text::collapse_whitespace(m[g].str());
  return {};
}

std::vector<RefBlock> scan_refs(std::string_view t) {
  const std::string lt = text::lower(t);
  std::vector<RefBlock> refs;
  for (std::size_t i = 0; i < t.size();) {
    if (t[i] != '<') {
      ++i;
      continue;
    }
    if (lt.compare(i, 4, "<!--") == 0 || open_tag_at(lt, i, "nowiki") || open_tag_at(lt, i, "pre")) {
      const auto e = opaque_end(lt, i);
      i = e == npos ? i + 1 : e;
      continue;
    }
    if (auto open = open_tag_at(lt, i, "ref")) {
      if (open->self_closing) {
        i = open->end;
        continue;
      }
      auto close = find_close_tag(lt, open->end, "ref");
      const std::size_t cend = close ? close->begin : t.size();
      refs.push_back({{open->end, cend}, ref_name(t.substr(i + 4, open->end - i - 4))});
      i = close ? close->end : t.size();
      continue;
    }
    ++i;
  }
  return refs;
}

}  // namespace

std::optional<std::string> citation_dedup_key(const TemplateCall& call) {
  std::string title, id, url;
  if (auto* v = call.find("title")) title = text::fold(*v);
  for (const auto& [k, v] : call.named_params) {
    const auto key = text::lower(text::trim(k));
    if (std::find(kIdentifierParams.begin(), kIdentifierParams.end(), key) !=
            kIdentifierParams.end() &&
        !text::trim(v).empty()) {
      id = key + ":" + text::fold(v);
      break;
    }
  }
  if (auto* v = call.find("url")) url = std::string(text::trim(*v));
  if (title.empty() && id.empty() && url.empty()) return std::nullopt;
  std::string key = call.name;
  for (const auto* part : {&title, &id, &url}) {
    key.push_back('\x1f');
    key += *part;
  }
  return key;
}

std::vector<RawCitation> extract_citations(const WikiPage& page, const TemplateRegistry& known,
                                           std::size_t max_words, ExtractStats* stats) {
  const std::string_view t = page.wikitext;
  ExtractStats local;
  ExtractStats& st = stats ? *stats : local;

  // Supported calls anywhere, descending into unsupported wrappers such as {{efn|...}}
  // or {{reflist|refs=...}}.
  std::vector<TemplateCall> candidates;
  std::vector<TemplateCall> work = tokenize_templates(t);
  while (!work.empty()) {
    TemplateCall call = std::move(work.back());
    work.pop_back();
    ++st.calls_seen;
    if (known.contains(call.name)) {
      candidates.push_back(std::move(call));
      continue;
    }
    const auto& s = call.source_span;
    auto inner = tokenize_templates(t.substr(s.begin + 2, s.size() - 4), s.begin + 2);
    for (auto& c : inner) work.push_back(std::move(c));
  }
  std::sort(candidates.begin(), candidates.end(), [](const TemplateCall& a, const TemplateCall& b) {
    return a.source_span.begin < b.source_span.begin;
  });

  // A named ref defined again later is a reuse of the first definition.
  const auto refs = scan_refs(t);
  std::vector<Span> reused;
  std::unordered_set<std::string> defined;
  for (const auto& r : refs) {
    if (r.name.empty()) continue;
    if (!defined.insert(r.name).second) reused.push_back(r.content);
  }

  std::vector<TemplateCall> kept;
  std::unordered_set<std::string> seen;
  for (auto& call : candidates) {
    const auto& s = call.source_span;
    const bool in_reuse = std::any_of(reused.begin(), reused.end(), [&](const Span& r) {
      return r.begin <= s.begin && s.end <= r.end;
    });
    if (in_reuse) {
      ++st.ref_reuse_dropped;
      continue;
    }
    if (auto key = citation_dedup_key(call)) {
      if (!seen.insert(*key).second) {
        ++st.duplicates_dropped;
        continue;
      }
    }
    kept.push_back(std::move(call));
  }

  std::vector<RawCitation> out;
  if (kept.empty()) return out;
  const PageText plain = strip_markup(t);
  out.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    RawCitation rc;
    rc.page_id = page.page_id;
    rc.page_title = page.title;
    rc.section_path = plain.section_at(kept[k].source_span.begin);
    rc.preceding_words = plain.words_before(kept[k].source_span.begin, max_words);
    rc.order_index = static_cast<int>(k);
    rc.page_total_words = plain.words.size();
    rc.page_citation_count = kept.size();
    rc.call = std::move(kept[k]);
    out.push_back(std::move(rc));
  }
  return out;
}

}  // namespace wikicite
