#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wikicite/uniform.hpp"

namespace wikicite {

enum class ClassLabel { kBook = 0, kJournal = 1, kWeb = 2 };
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {ClassLabel::kBook, ClassLabel::kJournal,
                                                                    ClassLabel::kWeb};

std::string_view to_string(ClassLabel label);
// Accepts the canonical names and the short forms book, journal, web.
std::optional<ClassLabel> parse_class_label(std::string_view name);

// Which labeling rule fired. Rules are tried in declaration order.
enum class LabelRule { kPmcOrPmid, kDoiJournalTemplate, kIsbn, kNewsDomain, kMediaDomain, kNone };

std::string_view to_string(LabelRule rule);
LabelRule matching_rule(const UniformCitation& c);
std::optional<ClassLabel> assign_label(const UniformCitation& c);

// Clears identifiers, type, url, url_top_level_domain, work, newspaper and website.
UniformCitation strip_leakage(UniformCitation c);
bool is_leakage_free(const UniformCitation& c);
// True when nothing but leakage fields was present before stripping.
bool is_low_information(const UniformCitation& stripped);

struct LabeledCitation {
  CitationRecord record;  // citation already leakage-stripped
  ClassLabel label = ClassLabel::kBook;

  bool operator==(const LabeledCitation&) const = default;
};

nlohmann::ordered_json to_json(const LabeledCitation& l);
LabeledCitation labeled_from_json(const nlohmann::json& j);

// Per-class sample sizes; classes without an entry are taken whole.
using SampleTargets = std::map<ClassLabel, std::size_t>;
SampleTargets parse_targets(std::string_view spec);  // "book=N,web=N,journal=N"

std::vector<LabeledCitation> build_training_set(std::vector<LabeledCitation> pool,
                                                const SampleTargets& targets, std::uint64_t seed);

struct LabelOutcome {
  std::vector<LabeledCitation> train;        // sampled, leakage-stripped
  std::vector<CitationRecord> unlabeled;     // no rule fired, kept as extracted
  std::map<std::string, std::size_t> by_rule;
  std::map<ClassLabel, std::size_t> pool;    // labeled citations before sampling
  std::size_t low_information = 0;           // labeled but empty once stripped
};

// Splits a corpus into the sampled training set and the records left for the classifier.
// Training records also lose their template text, which still carries the leaked fields.
LabelOutcome label_corpus(std::vector<CitationRecord> records, const SampleTargets& targets, std::uint64_t seed);

}  // namespace wikicite
