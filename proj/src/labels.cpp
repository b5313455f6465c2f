#include "wikicite/labels.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace wikicite {

namespace {

const std::unordered_set<std::string_view> kNewsDomains = {
    "nytimes", "bbc", "washingtonpost", "cnn", "theguardian", "huffingtonpost", "indiatimes"};

const std::unordered_set<std::string_view> kMediaDomains = {
    "youtube", "rollingstone", "billboard", "mtv", "metacritic", "discogs", "allmusic"};

bool is_journal_template(const UniformCitation& c) {
  const auto type = text::lower(c.type);
  if (type == "cite journal" || type == "cite conference") return true;
  return type == "citation" && !text::trim(c.periodical).empty();
}

}  // namespace

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::kBook: return "BOOK";
    case ClassLabel::kJournal: return "JOURNAL_ARTICLE";
    case ClassLabel::kWeb: return "WEB_CONTENT";
  }
  return "?";
}

std::optional<ClassLabel> parse_class_label(std::string_view name) {
  const auto n = text::lower(text::trim(name));
  if (n == "book") return ClassLabel::kBook;
  if (n == "journal_article" || n == "journal") return ClassLabel::kJournal;
  if (n == "web_content" || n == "web") return ClassLabel::kWeb;
  return std::nullopt;
}

std::string_view to_string(LabelRule rule) {
  switch (rule) {
    case LabelRule::kPmcOrPmid: return "pmc_or_pmid";
    case LabelRule::kDoiJournalTemplate: return "doi_journal_template";
    case LabelRule::kIsbn: return "isbn";
    case LabelRule::kNewsDomain: return "news_domain";
    case LabelRule::kMediaDomain: return "media_domain";
    case LabelRule::kNone: return "none";
  }
  return "?";
}

LabelRule matching_rule(const UniformCitation& c) {
  if (c.has_id(IdKind::kPmc) || c.has_id(IdKind::kPmid)) return LabelRule::kPmcOrPmid;
  if (c.has_id(IdKind::kDoi) && is_journal_template(c)) return LabelRule::kDoiJournalTemplate;
  if (c.has_id(IdKind::kIsbn)) return LabelRule::kIsbn;
  const auto domain = text::lower(c.url_top_level_domain);
  if (kNewsDomains.count(domain)) return LabelRule::kNewsDomain;
  if (kMediaDomains.count(domain)) return LabelRule::kMediaDomain;
  return LabelRule::kNone;
}

std::optional<ClassLabel> assign_label(const UniformCitation& c) {
  switch (matching_rule(c)) {
    case LabelRule::kPmcOrPmid:
    case LabelRule::kDoiJournalTemplate: return ClassLabel::kJournal;
    case LabelRule::kIsbn: return ClassLabel::kBook;
    case LabelRule::kNewsDomain:
    case LabelRule::kMediaDomain: return ClassLabel::kWeb;
    case LabelRule::kNone: break;
  }
  return std::nullopt;
}

UniformCitation strip_leakage(UniformCitation c) {
  c.id_list.clear();
  c.type.clear();
  c.url.clear();
  c.url_top_level_domain.clear();
  c.work.clear();
  c.newspaper.clear();
  c.website.clear();
  return c;
}

bool is_leakage_free(const UniformCitation& c) {
  return c.id_list.empty() && c.type.empty() && c.url.empty() && c.url_top_level_domain.empty() &&
         c.work.empty() && c.newspaper.empty() && c.website.empty();
}

bool is_low_information(const UniformCitation& stripped) {
  return stripped == UniformCitation{};
}

nlohmann::ordered_json to_json(const LabeledCitation& l) {
  auto j = to_json(l.record);
  j["label"] = std::string(to_string(l.label));
  return j;
}

LabeledCitation labeled_from_json(const nlohmann::json& j) {
  LabeledCitation l;
  l.record = record_from_json(j);
  const auto name = j.at("label").get<std::string>();
  auto label = parse_class_label(name);
  if (!label) throw UserError("unknown class label: " + name);
  l.label = *label;
  return l;
}

SampleTargets parse_targets(std::string_view spec) {
  SampleTargets out;
  for (auto item : text::split(spec, ',')) {
    item = text::trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw UserError("bad sampling target: " + std::string(item));
    auto label = parse_class_label(item.substr(0, eq));
    if (!label) throw UserError("unknown class in sampling target: " + std::string(item.substr(0, eq)));
    const std::string n(text::trim(item.substr(eq + 1)));
    if (n.empty() || !std::all_of(n.begin(), n.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw UserError("sampling target must be a non-negative integer: " + std::string(item));
    out[*label] = std::stoull(n);
  }
  return out;
}

std::vector<LabeledCitation> build_training_set(std::vector<LabeledCitation> pool,
                                                const SampleTargets& targets, std::uint64_t seed) {
  std::array<std::vector<LabeledCitation>, kNumClasses> by_class;
  for (auto& l : pool) by_class[static_cast<std::size_t>(l.label)].push_back(std::move(l));

  std::vector<std::string> shortfalls;
  for (auto label : kAllClasses) {
    auto it = targets.find(label);
    const auto available = by_class[static_cast<std::size_t>(label)].size();
    if (it != targets.end() && it->second > available)
      shortfalls.push_back(std::string(to_string(label)) + ": requested " + std::to_string(it->second) +
                           ", available " + std::to_string(available));
  }
  if (!shortfalls.empty()) throw UserError("sampling target exceeds available citations (" +
                                           text::join(shortfalls, "; ") + ")");

  std::mt19937_64 rng(seed);
  std::vector<LabeledCitation> out;
  for (auto label : kAllClasses) {
    auto& items = by_class[static_cast<std::size_t>(label)];
    auto it = targets.find(label);
    if (it != targets.end() && it->second < items.size()) {
      // Partial Fisher-Yates: the first n slots become a uniform sample without replacement.
      const std::size_t n = it->second;
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded_rand(rng, items.size() - i));
        std::swap(items[i], items[j]);
      }
      items.resize(n);
    }
    for (auto& l : items) out.push_back(std::move(l));
  }
  stable_shuffle(out, rng);
  return out;
}

LabelOutcome label_corpus(std::vector<CitationRecord> records, const SampleTargets& targets, std::uint64_t seed) {
  LabelOutcome out;
  std::vector<LabeledCitation> pool;
  for (auto& r : records) {
    ++out.by_rule[std::string(to_string(matching_rule(r.citation)))];
    const auto label = assign_label(r.citation);
    if (!label) {
      out.unlabeled.push_back(std::move(r));
      continue;
    }
    r.citation = strip_leakage(std::move(r.citation));
    r.template_text.clear();
    if (is_low_information(r.citation)) {
      ++out.low_information;
      continue;
    }
    ++out.pool[*label];
    pool.push_back({std::move(r), *label});
  }
  out.train = build_training_set(std::move(pool), targets, seed);
  return out;
}

}  // namespace wikicite
