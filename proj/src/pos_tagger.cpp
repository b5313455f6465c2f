#include "wikicite/pos_tagger.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "wikicite/common.hpp"

namespace wikicite {

namespace {

constexpr std::string_view kEdgePunct = ".,;:!?\"'()[]{}";

bool is_title_case(std::string_view w) {
  // Python's str.istitle() restricted to ASCII letters.
  bool cased = false, prev_cased = false;
  for (char ch : w) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isupper(c)) {
      if (prev_cased) return false;
      prev_cased = cased = true;
    } else if (std::islower(c)) {
      if (!prev_cased) return false;
      prev_cased = cased = true;
    } else {
      prev_cased = false;
    }
  }
  return cased;
}

bool is_numeral(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || std::string_view("-,.:/%$").find(c) != std::string_view::npos;
  });
}

std::vector<std::vector<std::string>> rule_lines(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (auto line : text::split(text, '\n')) {
    line = text::trim(line);
    if (line.empty() || line.substr(0, 3) == ";;;") continue;
    out.push_back(text::split_words(line));
  }
  return out;
}

bool is_lexical_command(std::string_view c) {
  static const std::unordered_set<std::string_view> kCommands = {
      "word", "char", "haspref", "hassuf", "addpref", "addsuf", "deletepref", "deletesuf", "goodleft",
      "goodright"};
  if (kCommands.count(c)) return true;
  return c.size() > 1 && c[0] == 'f' && kCommands.count(c.substr(1));
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

}  // namespace

std::string tagging_form(std::string_view token) {
  auto b = token.find_first_not_of(kEdgePunct);
  if (b == std::string_view::npos) return std::string(token);
  auto e = token.find_last_not_of(kEdgePunct);
  return std::string(token.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------

RuleTagger RuleTagger::from_strings(std::string_view lexicon, std::string_view morphology,
                                    std::string_view context) {
  RuleTagger t;
  for (auto& f : rule_lines(lexicon)) {
    if (f.size() < 2) continue;
    t.lexicon_[f[0]] = f[1];
  }
  for (auto& f : rule_lines(morphology))
    if (f.size() >= 4) t.morphology_.push_back({std::move(f)});
  for (auto& f : rule_lines(context))
    if (f.size() >= 4) t.context_.push_back({std::move(f)});
  return t;
}

RuleTagger RuleTagger::load(const std::filesystem::path& dir) {
  for (const char* f : {"lexicon.txt", "morphology.txt", "context.txt"})
    if (!std::filesystem::exists(dir / f))
      throw DependencyError("POS tagger data file missing: " + (dir / f).string());
  return from_strings(read_file(dir / "lexicon.txt"), read_file(dir / "morphology.txt"),
                      read_file(dir / "context.txt"));
}

void RuleTagger::apply_morphology(std::vector<std::pair<std::string, std::string>>& tagged,
                                  std::size_t i) const {
  const std::string& w = tagged[i].first;
  std::string& tag = tagged[i].second;
  static const std::string kNone;
  const std::string& prev_word = i > 0 ? tagged[i - 1].first : kNone;
  const std::string& next_word = i + 1 < tagged.size() ? tagged[i + 1].first : kNone;
  auto known = [&](const std::string& s) { return lexicon_.count(s) != 0; };

  for (const auto& rule : morphology_) {
    const auto& r = rule.f;
    // "ly hassuf 2 RB x" or, conditioned on the current tag, "NN s fhassuf 1 NNS x".
    std::string cmd, x;
    if (is_lexical_command(r[1])) {
      x = r[0];
      cmd = r[1];
    } else if (is_lexical_command(r[2])) {
      if (tag != r[0]) continue;
      x = r[1];
      cmd = r[2].substr(r[2][0] == 'f' ? 1 : 0);
    } else {
      continue;
    }
    const std::string& pos = r[r.size() - 2];
    bool hit = false;
    if (cmd == "word") hit = x == w;
    else if (cmd == "char") hit = w.find(x) != std::string::npos;
    else if (cmd == "haspref") hit = starts_with(w, x);
    else if (cmd == "hassuf") hit = ends_with(w, x);
    else if (cmd == "addpref") hit = known(x + w);
    else if (cmd == "addsuf") hit = known(w + x);
    else if (cmd == "deletepref") hit = starts_with(w, x) && known(w.substr(x.size()));
    else if (cmd == "deletesuf") hit = ends_with(w, x) && known(w.substr(0, w.size() - x.size()));
    // The reference rule set reads goodleft against the next word and goodright against
    // the previous one; kept as is so the shipped rules behave as trained.
    else if (cmd == "goodleft") hit = i + 1 < tagged.size() && x == next_word;
    else if (cmd == "goodright") hit = i > 0 && x == prev_word;
    if (hit) tag = pos;
  }
}

void RuleTagger::apply_context(std::vector<std::pair<std::string, std::string>>& tagged) const {
  static const std::pair<std::string, std::string> kPad{"STAART", "STAART"};
  const std::size_t n = tagged.size();
  std::vector<std::pair<std::string, std::string>> t;
  t.reserve(n + 6);
  for (int k = 0; k < 3; ++k) t.push_back(kPad);
  for (auto& p : tagged) t.push_back(p);
  for (int k = 0; k < 3; ++k) t.push_back(kPad);

  for (std::size_t i = 3; i < n + 3; ++i) {
    for (const auto& rule : context_) {
      const auto& r = rule.f;
      if (t[i].second == "STAART") continue;
      if (t[i].second != r[0] && r[0] != "*") continue;
      const std::string cmd = text::lower(r[2]);
      const std::string& x = r[3];
      static const std::string kEmpty;
      const std::string& y = r.size() > 4 ? r[4] : kEmpty;
      auto tg = [&](int d) -> const std::string& { return t[i + d].second; };
      auto wd = [&](int d) -> const std::string& { return t[i + d].first; };
      bool hit = false;
      if (cmd == "prevtag") hit = x == tg(-1);
      else if (cmd == "nexttag") hit = x == tg(1);
      else if (cmd == "prev2tag") hit = x == tg(-2);
      else if (cmd == "next2tag") hit = x == tg(2);
      else if (cmd == "prev1or2tag") hit = x == tg(-1) || x == tg(-2);
      else if (cmd == "next1or2tag") hit = x == tg(1) || x == tg(2);
      else if (cmd == "prev1or2or3tag") hit = x == tg(-1) || x == tg(-2) || x == tg(-3);
      else if (cmd == "next1or2or3tag") hit = x == tg(1) || x == tg(2) || x == tg(3);
      else if (cmd == "surroundtag") hit = x == tg(-1) && y == tg(1);
      else if (cmd == "curwd") hit = x == wd(0);
      else if (cmd == "prevwd") hit = x == wd(-1);
      else if (cmd == "nextwd") hit = x == wd(1);
      else if (cmd == "prev1or2wd") hit = x == wd(-1) || x == wd(-2);
      else if (cmd == "next1or2wd") hit = x == wd(1) || x == wd(2);
      else if (cmd == "prevwdtag") hit = x == wd(-1) && y == tg(-1);
      else if (cmd == "nextwdtag") hit = x == wd(1) && y == tg(1);
      else if (cmd == "wdprevtag") hit = x == tg(-1) && y == wd(0);
      else if (cmd == "wdnexttag") hit = x == wd(0) && y == tg(1);
      else if (cmd == "wdand2aft") hit = x == wd(0) && y == wd(2);
      else if (cmd == "wdand2tagbfr") hit = x == tg(-2) && y == wd(0);
      else if (cmd == "wdand2tagaft") hit = x == wd(0) && y == tg(2);
      else if (cmd == "lbigram") hit = x == wd(-1) && y == wd(0);
      else if (cmd == "rbigram") hit = x == wd(0) && y == wd(1);
      else if (cmd == "prevbigram") hit = x == tg(-2) && y == tg(-1);
      else if (cmd == "nextbigram") hit = x == tg(1) && y == tg(2);
      if (hit) t[i].second = r[1];
    }
  }
  for (std::size_t i = 0; i < n; ++i) tagged[i] = std::move(t[i + 3]);
}

std::vector<std::string> RuleTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<std::pair<std::string, std::string>> tagged;
  tagged.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string w = tagging_form(tokens[i]);
    std::string tag;
    if (auto it = lexicon_.find(w); it != lexicon_.end()) tag = it->second;
    else if (i == 0)
      if (auto lo = lexicon_.find(text::lower(w)); lo != lexicon_.end()) tag = lo->second;
    tagged.emplace_back(std::move(w), std::move(tag));
  }
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (!tagged[i].second.empty()) continue;
    const auto& w = tagged[i].first;
    if (is_title_case(w)) {
      tagged[i].second = "NNP";
    } else if (is_numeral(w)) {
      tagged[i].second = "CD";
    } else {
      tagged[i].second = "NN";
      apply_morphology(tagged, i);
    }
  }
  apply_context(tagged);
  std::vector<std::string> out;
  out.reserve(tagged.size());
  for (auto& [w, t] : tagged) out.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

std::string PerceptronTagger::normalize(const std::string& word) {
  if (word.find('-') != std::string::npos && word.front() != '-') return "!HYPHEN";
  if (word.size() == 4 && std::all_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return "!YEAR";
  if (!word.empty() && std::isdigit(static_cast<unsigned char>(word.front()))) return "!DIGITS";
  return text::lower(word);
}

std::vector<std::string> PerceptronTagger::features(std::size_t i, const std::vector<std::string>& ctx,
                                                    const std::string& word, const std::string& prev,
                                                    const std::string& prev2) {
  auto suffix = [](const std::string& s) { return s.size() > 3 ? s.substr(s.size() - 3) : s; };
  i += 2;
  return {
      "bias",
      "i suffix " + suffix(word),
      "i pref1 " + word.substr(0, 1),
      "i-1 tag " + prev,
      "i-2 tag " + prev2,
      "i tag+i-2 tag " + prev + " " + prev2,
      "i word " + ctx[i],
      "i-1 tag+i word " + prev + " " + ctx[i],
      "i-1 word " + ctx[i - 1],
      "i-1 suffix " + suffix(ctx[i - 1]),
      "i-2 word " + ctx[i - 2],
      "i+1 word " + ctx[i + 1],
      "i+1 suffix " + suffix(ctx[i + 1]),
      "i+2 word " + ctx[i + 2],
  };
}

std::string PerceptronTagger::predict(const std::vector<std::string>& feats) const {
  std::map<std::string, double> scores;
  for (const auto& c : classes_) scores[c] = 0.0;
  for (const auto& f : feats) {
    auto it = weights_.find(f);
    if (it == weights_.end()) continue;
    for (const auto& [c, w] : it->second) scores[c] += w;
  }
  std::string best;
  double best_score = 0;
  for (const auto& [c, s] : scores)  // ordered map: ties go to the smallest tag
    if (best.empty() || s > best_score) best = c, best_score = s;
  return best.empty() ? "NN" : best;
}

std::vector<std::string> PerceptronTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<std::string> words;
  for (const auto& t : tokens) words.push_back(tagging_form(t));
  std::vector<std::string> ctx = {"-START-", "-START2-"};
  for (const auto& w : words) ctx.push_back(normalize(w));
  ctx.push_back("-END-");
  ctx.push_back("-END2-");
  std::string prev = "-START-", prev2 = "-START2-";
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string t;
    if (auto it = tagdict_.find(words[i]); it != tagdict_.end()) t = it->second;
    else t = predict(features(i, ctx, words[i], prev, prev2));
    out.push_back(t);
    prev2 = std::move(prev);
    prev = std::move(t);
  }
  return out;
}

void PerceptronTagger::train(const std::vector<Sentence>& sentences, int iterations, std::uint64_t seed) {
  // Unambiguous frequent words are tagged from a dictionary rather than the model.
  std::map<std::string, std::map<std::string, int>> counts;
  std::set<std::string> classes;
  for (const auto& s : sentences)
    for (const auto& [w, t] : s) {
      ++counts[tagging_form(w)][t];
      classes.insert(t);
    }
  classes_.assign(classes.begin(), classes.end());
  tagdict_.clear();
  for (const auto& [w, tags] : counts) {
    int n = 0, best = 0;
    std::string mode;
    for (const auto& [t, c] : tags) {
      n += c;
      if (c > best) best = c, mode = t;
    }
    if (n >= 20 && static_cast<double>(best) / n >= 0.97) tagdict_[w] = mode;
  }

  weights_.clear();
  std::map<std::pair<std::string, std::string>, double> totals;
  std::map<std::pair<std::string, std::string>, long> stamps;
  long instances = 0;
  auto update = [&](const std::string& truth, const std::string& guess, const std::vector<std::string>& feats) {
    auto upd = [&](const std::string& f, const std::string& c, double v) {
      double& w = weights_[f][c];
      const auto key = std::make_pair(f, c);
      totals[key] += static_cast<double>(instances - stamps[key]) * w;
      stamps[key] = instances;
      w += v;
    };
    ++instances;
    if (truth == guess) return;
    for (const auto& f : feats) {
      upd(f, truth, 1.0);
      upd(f, guess, -1.0);
    }
  };

  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (int it = 0; it < iterations; ++it) {
    for (auto idx : order) {
      const auto& s = sentences[idx];
      std::vector<std::string> ctx = {"-START-", "-START2-"};
      for (const auto& [w, t] : s) ctx.push_back(normalize(tagging_form(w)));
      ctx.push_back("-END-");
      ctx.push_back("-END2-");
      std::string prev = "-START-", prev2 = "-START2-";
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string w = tagging_form(s[i].first);
        std::string guess;
        if (auto d = tagdict_.find(w); d != tagdict_.end()) {
          guess = d->second;
        } else {
          auto feats = features(i, ctx, w, prev, prev2);
          guess = predict(feats);
          update(s[i].second, guess, feats);
        }
        prev2 = std::move(prev);
        prev = guess;
      }
    }
    stable_shuffle(order, rng);
  }
  // Average every weight over all update steps.
  for (auto& [f, by_class] : weights_)
    for (auto& [c, w] : by_class) {
      const auto key = std::make_pair(f, c);
      const double total = totals[key] + static_cast<double>(instances - stamps[key]) * w;
      w = instances > 0 ? total / static_cast<double>(instances) : 0.0;
    }
}

void PerceptronTagger::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "wikicite-perceptron-tagger";
  j["version"] = 1;
  j["classes"] = classes_;
  j["tagdict"] = std::map<std::string, std::string>(tagdict_.begin(), tagdict_.end());
  nlohmann::json w = nlohmann::json::object();
  for (const auto& [f, by_class] : weights_) {
    std::map<std::string, double> nz;
    for (const auto& [c, v] : by_class)
      if (v != 0.0) nz[c] = v;
    if (!nz.empty()) w[f] = nz;
  }
  j["weights"] = std::move(w);
  write_file_atomic(path, j.dump());
}

PerceptronTagger PerceptronTagger::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DependencyError("cannot parse tagger weights " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "wikicite-perceptron-tagger" || j.value("version", 0) != 1)
    throw DependencyError("unsupported tagger weights file: " + path.string());
  PerceptronTagger t;
  t.classes_ = j.at("classes").get<std::vector<std::string>>();
  for (const auto& [w, tag] : j.at("tagdict").items()) t.tagdict_[w] = tag.get<std::string>();
  for (const auto& [f, by_class] : j.at("weights").items())
    for (const auto& [c, v] : by_class.items()) t.weights_[f][c] = v.get<double>();
  return t;
}

std::unique_ptr<PosTagger> make_tagger(std::string_view kind, const std::filesystem::path& path) {
  if (kind == "rule") return std::make_unique<RuleTagger>(RuleTagger::load(path));
  if (kind == "perceptron") return std::make_unique<PerceptronTagger>(PerceptronTagger::load(path));
  throw UserError("unknown POS tagger kind: " + std::string(kind));
}

}  // namespace wikicite
