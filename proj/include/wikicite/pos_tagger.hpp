#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace wikicite {

// Penn Treebank part-of-speech tagging of statement words.
class PosTagger {
public:
  virtual ~PosTagger() = default;
  // One tag per input token; deterministic.
  virtual std::vector<std::string> tag(const std::vector<std::string>& tokens) const = 0;
  virtual std::string name() const = 0;
};

// Surrounding quote/bracket/sentence punctuation removed; all-punctuation tokens are
// returned as they are. Statement words carry their punctuation, the taggers see this form.
std::string tagging_form(std::string_view token);

// Brill-style transformation tagger: lexicon lookup, capitalization and numeral
// defaults, lexical (morphology) rules for unknown words, then contextual rules.
class RuleTagger final : public PosTagger {
public:
  // Expects lexicon.txt, morphology.txt and context.txt in `dir`.
  static RuleTagger load(const std::filesystem::path& dir);
  static RuleTagger from_strings(std::string_view lexicon, std::string_view morphology,
                                 std::string_view context);

  std::vector<std::string> tag(const std::vector<std::string>& tokens) const override;
  std::string name() const override { return "rule"; }
  std::size_t lexicon_size() const { return lexicon_.size(); }

private:
  struct Rule {
    std::vector<std::string> f;
  };
  void apply_morphology(std::vector<std::pair<std::string, std::string>>& tagged, std::size_t i) const;
  void apply_context(std::vector<std::pair<std::string, std::string>>& tagged) const;

  std::unordered_map<std::string, std::string> lexicon_;
  std::vector<Rule> morphology_;
  std::vector<Rule> context_;
};

// Averaged perceptron tagger with the usual word-shape and neighbour features.
class PerceptronTagger final : public PosTagger {
public:
  using Sentence = std::vector<std::pair<std::string, std::string>>;

  void train(const std::vector<Sentence>& sentences, int iterations, std::uint64_t seed);
  void save(const std::filesystem::path& path) const;
  static PerceptronTagger load(const std::filesystem::path& path);

  std::vector<std::string> tag(const std::vector<std::string>& tokens) const override;
  std::string name() const override { return "perceptron"; }

private:
  std::string predict(const std::vector<std::string>& features) const;
  static std::vector<std::string> features(std::size_t i, const std::vector<std::string>& context,
                                           const std::string& word, const std::string& prev,
                                           const std::string& prev2);
  static std::string normalize(const std::string& word);

  std::unordered_map<std::string, std::unordered_map<std::string, double>> weights_;
  std::unordered_map<std::string, std::string> tagdict_;
  std::vector<std::string> classes_;
};

// "rule" loads the shipped rule data from `path` (a directory); "perceptron" loads a
// weights file.
std::unique_ptr<PosTagger> make_tagger(std::string_view kind, const std::filesystem::path& path);

}  // namespace wikicite
