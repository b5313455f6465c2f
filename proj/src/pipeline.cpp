#include "wikicite/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "wikicite/common.hpp"
#include "wikicite/dump_ingest.hpp"
#include "wikicite/log.hpp"
#include "wikicite/pos_tagger.hpp"
#include "wikicite/uniform.hpp"
#include "wikicite/wikicode.hpp"

namespace fs = std::filesystem;

namespace wikicite {

namespace {

fs::path data_dir() {
  if (const char* env = std::getenv("WIKICITE_DATA_DIR"); env && *env) return env;
  return WIKICITE_DATA_DIR;
}

// ---------------------------------------------------------------------------
// Config reading

class Section {
public:
  Section(YAML::Node node, std::string prefix, std::vector<std::string>* errors, fs::path base)
      : node_(std::move(node)), prefix_(std::move(prefix)), errors_(errors), base_(std::move(base)) {}

  template <typename T>
  void get(const std::string& key, T& out, const char* expected) {
    const YAML::Node v = lookup(key);
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      errors_->push_back(prefix_ + key + ": expected " + expected);
    }
  }

  void count(const std::string& key, std::size_t& out) {
    long long v = static_cast<long long>(out);
    get(key, v, "an integer");
    if (v < 0) errors_->push_back(prefix_ + key + " must be >= 0");
    else out = static_cast<std::size_t>(v);
  }

  void path(const std::string& key, fs::path& out) {
    std::string s;
    get(key, s, "a path");
    if (s.empty()) return;
    fs::path p(s);
    out = p.is_relative() && !base_.empty() ? base_ / p : p;
  }

  Section sub(const std::string& key) {
    YAML::Node v = lookup(key);
    if (v && !v.IsMap()) {
      errors_->push_back(prefix_ + key + ": expected a mapping");
      v = YAML::Node();
    }
    return Section(v ? v : YAML::Node(), prefix_ + key + ".", errors_, base_);
  }

  YAML::Node lookup(const std::string& key) {
    seen_.insert(key);
    if (!node_.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& n = node_;
    YAML::Node v = n[key];
    if (!v.IsDefined() || v.IsNull()) return YAML::Node(YAML::NodeType::Undefined);
    return v;
  }

  void reject_unknown() {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) errors_->push_back("unknown key '" + prefix_ + key + "'");
    }
  }

  std::vector<std::string>& errors() { return *errors_; }
  const std::string& prefix() const { return prefix_; }

private:
  YAML::Node node_;
  std::string prefix_;
  std::vector<std::string>* errors_;
  fs::path base_;
  std::set<std::string> seen_;
};

void add_prefixed(std::vector<std::string>& errors, const std::string& section, const std::vector<std::string>& v) {
  for (const auto& s : v) errors.push_back(section + ": " + s);
}

PipelineConfig parse_config_at(const std::string& yaml_text, const fs::path& base) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("config is not valid YAML: ") + e.what()});
  }
  std::vector<std::string> errors;
  if (root.IsDefined() && !root.IsNull() && !root.IsMap()) throw ConfigError({"config must be a mapping"});

  PipelineConfig c;
  Section top(root, "", &errors, base);
  top.path("dump", c.dump);
  top.path("out_dir", c.out_dir);
  top.path("templates", c.templates);
  top.path("aliases", c.aliases);
  top.get("log_level", c.log_level, "a string");
  top.count("workers", c.workers);
  std::uint64_t seed = 42;
  top.get("seed", seed, "an unsigned integer");
  c.label_seed = seed;
  c.train.seed = seed;

  {
    auto s = top.sub("label");
    c.targets.clear();
    const YAML::Node t = s.lookup("targets");
    if (t && t.IsScalar()) {
      try {
        c.targets = parse_targets(t.as<std::string>());
      } catch (const UserError& e) {
        errors.push_back(std::string("label.targets: ") + e.what());
      }
    } else if (t && t.IsMap()) {
      for (const auto& kv : t) {
        const auto name = kv.first.as<std::string>();
        const auto label = parse_class_label(name);
        long long n = -1;
        try {
          n = kv.second.as<long long>();
        } catch (const YAML::Exception&) {
        }
        if (!label) errors.push_back("label.targets: unknown class '" + name + "'");
        else if (n < 0) errors.push_back("label.targets." + name + ": expected a non-negative integer");
        else c.targets[*label] = static_cast<std::size_t>(n);
      }
    } else if (t) {
      errors.push_back("label.targets: expected \"book=N,web=N,journal=N\" or a mapping");
    }
    s.get("seed", c.label_seed, "an unsigned integer");
    s.reject_unknown();
  }
  {
    auto s = top.sub("features");
    s.count("min_count", c.vocab.min_count);
    s.count("max_statement_words", c.vocab.max_statement_words);
    s.count("pos_top", c.vocab.pos_top);
    s.count("sections_top", c.vocab.sections_top);
    s.get("subword_buckets", c.vocab.subword_buckets, "an unsigned integer");
    s.count("ngram_min", c.vocab.ngram_min);
    s.count("ngram_max", c.vocab.ngram_max);
    s.get("tagger", c.tagger, "a string");
    s.path("tagger_path", c.tagger_path);
    s.reject_unknown();
    if (c.vocab.max_statement_words < 1) errors.push_back("features.max_statement_words must be >= 1");
    if (c.vocab.min_count < 1) errors.push_back("features.min_count must be >= 1");
    if (c.vocab.subword_buckets < 1) errors.push_back("features.subword_buckets must be >= 1");
    if (c.vocab.ngram_min < 1 || c.vocab.ngram_min > c.vocab.ngram_max)
      errors.push_back("features: ngram_min must satisfy 1 <= ngram_min <= ngram_max");
    if (c.tagger != "rule" && c.tagger != "perceptron")
      errors.push_back("features.tagger must be \"rule\" or \"perceptron\"");
    if (c.tagger == "perceptron" && c.tagger_path.empty())
      errors.push_back("features.tagger_path is required for the perceptron tagger");
  }
  {
    auto s = top.sub("model");
    s.get("char_embed_dim", c.model.char_embed_dim, "an integer");
    s.get("token_embed_dim", c.model.token_embed_dim, "an integer");
    s.get("statement_encoder_dim", c.model.statement_encoder_dim, "an integer");
    s.get("hidden_layers", c.model.hidden_layers, "a list of integers");
    s.get("dropout", c.model.dropout, "a number");
    std::string encoder(to_string(c.model.encoder)), activation(to_string(c.model.activation)),
        loss(to_string(c.model.loss));
    s.get("encoder", encoder, "a string");
    s.get("activation", activation, "a string");
    s.get("loss", loss, "a string");
    if (auto e = parse_encoder_kind(encoder)) c.model.encoder = *e;
    else errors.push_back("model.encoder: unknown encoder '" + encoder + "'");
    if (auto a = parse_activation(activation)) c.model.activation = *a;
    else errors.push_back("model.activation: unknown activation '" + activation + "'");
    if (auto l = parse_loss_kind(loss)) c.model.loss = *l;
    else errors.push_back("model.loss: unknown loss '" + loss + "'");
    s.get("freeze_chars", c.model.freeze_chars, "true or false");
    s.reject_unknown();
    add_prefixed(errors, "model", c.model.violations());
  }
  {
    auto s = top.sub("train");
    s.get("epochs", c.train.epochs, "an integer");
    s.get("test_fraction", c.train.test_fraction, "a number");
    s.get("beta1", c.train.beta1, "a number");
    s.get("beta2", c.train.beta2, "a number");
    s.get("epsilon", c.train.epsilon, "a number");
    s.get("learning_rate", c.train.initial_lr, "a number");
    s.get("min_learning_rate", c.train.min_lr, "a number");
    s.get("patience", c.train.patience, "an integer");
    s.get("lr_factor", c.train.lr_factor, "a number");
    s.count("batch_size", c.train.batch_size);
    s.get("seed", c.train.seed, "an unsigned integer");
    s.get("pretrained_chars", c.use_pretrained_chars, "true or false");
    s.path("word_vectors", c.word_vectors);
    s.reject_unknown();
    add_prefixed(errors, "train", c.train.violations());
  }
  {
    auto s = top.sub("lookup");
    s.get("threshold", c.lookup.score_threshold, "a number");
    s.get("rps", c.lookup.max_rps, "an integer");
    s.count("retained_results", c.lookup.retained_results);
    s.get("max_attempts", c.lookup.max_attempts, "an integer");
    s.get("backoff", c.lookup.backoff_initial_s, "a number");
    s.get("timeout", c.lookup.timeout_s, "a number");
    s.count("workers", c.lookup.workers);
    s.path("cache", c.lookup.cache_dir);
    s.get("endpoint", c.lookup.endpoint, "a string");
    s.get("mailto", c.lookup.mailto, "a string");
    s.path("replay", c.replay);
    s.path("gold", c.gold);
    s.get("tuning_fraction", c.tuning_fraction, "a number");
    s.reject_unknown();
    add_prefixed(errors, "lookup", c.lookup.violations());
    if (!(c.tuning_fraction > 0.0 && c.tuning_fraction < 1.0)) errors.push_back("lookup.tuning_fraction must be in (0, 1)");
  }
  {
    auto s = top.sub("report");
    s.get("first_year", c.report.first_year, "an integer");
    s.get("last_year", c.report.last_year, "an integer");
    s.count("smoothing_window", c.report.smoothing_window);
    std::string mode = c.report.trailing_smoothing ? "trailing" : "centered";
    s.get("smoothing", mode, "a string");
    if (mode == "centered" || mode == "trailing") c.report.trailing_smoothing = mode == "trailing";
    else errors.push_back("report.smoothing must be \"centered\" or \"trailing\"");
    s.count("top_journals", c.report.top_journals);
    const YAML::Node f = s.lookup("formats");
    if (f) {
      std::vector<std::string> formats;
      if (f.IsScalar()) {
        const auto list = f.as<std::string>();
        for (auto part : text::split(list, ',')) formats.emplace_back(text::trim(part));
      } else if (f.IsSequence()) {
        for (const auto& x : f) formats.push_back(x.as<std::string>());
      }
      c.report.csv = c.report.png = false;
      for (const auto& fm : formats) {
        if (fm == "csv") c.report.csv = true;
        else if (fm == "png") c.report.png = true;
        else errors.push_back("report.formats: unknown format '" + fm + "'");
      }
    }
    s.reject_unknown();
    add_prefixed(errors, "report", c.report.violations());
  }
  top.reject_unknown();
  if (c.workers < 1) errors.push_back("workers must be >= 1");
  if (!errors.empty()) throw ConfigError(errors);

  if (c.lookup.mailto.empty())
    if (const char* m = std::getenv("WIKICITE_MAILTO")) c.lookup.mailto = m;
  c.report.workers = c.workers;
  return c;
}

// ---------------------------------------------------------------------------
// Files

class AtomicFile {
public:
  explicit AtomicFile(fs::path path) : path_(std::move(path)), tmp_(path_.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw UserError("cannot write " + tmp_.string());
  }
  ~AtomicFile() {
    if (!done_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  std::ostream& out() { return out_; }
  void commit() {
    out_.close();
    if (!out_) throw UserError("failed writing " + tmp_.string());
    fs::rename(tmp_, path_);
    done_ = true;
  }

private:
  fs::path path_, tmp_;
  std::ofstream out_;
  bool done_ = false;
};

template <typename Fn>
void read_jsonl(const fs::path& path, Fn&& fn) {
  if (!fs::exists(path)) throw UserError("missing input " + path.string());
  for_each_line(path, [&](std::string_view line, std::size_t no) {
    if (text::trim(line).empty()) return;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw UserError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  });
}

std::size_t count_rows(const fs::path& p) {
  std::size_t n = 0;
  for_each_line(p, [&](std::string_view line, std::size_t) {
    if (!text::trim(line).empty()) ++n;
  });
  return n;
}

std::string hash_path(const fs::path& p) {
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += fs::relative(f, p).generic_string() + ":" + sha256_file(f) + "\n";
    return sha256_hex(acc);
  }
  return sha256_file(p);
}

std::string record_key(const CitationRecord& r) {
  return std::to_string(r.page_id) + ":" + std::to_string(r.order_index);
}

fs::path templates_file(const PipelineConfig& c) {
  return c.templates.empty() ? data_dir() / "templates.txt" : c.templates;
}
fs::path aliases_dir(const PipelineConfig& c) { return c.aliases.empty() ? data_dir() / "aliases" : c.aliases; }
fs::path tagger_source(const PipelineConfig& c) { return c.tagger_path.empty() ? data_dir() / "pos" : c.tagger_path; }

// ---------------------------------------------------------------------------
// Stage graph

struct StageDef {
  std::vector<std::string> deps;
  std::vector<fs::path> external;   // files outside out_dir
  std::vector<std::string> inputs;  // out_dir-relative upstream outputs
  nlohmann::ordered_json config;
};

nlohmann::ordered_json vocab_json(const VocabConfig& v) {
  return {{"min_count", v.min_count},       {"max_statement_words", v.max_statement_words},
          {"pos_top", v.pos_top},           {"sections_top", v.sections_top},
          {"subword_buckets", v.subword_buckets}, {"ngram_min", v.ngram_min},
          {"ngram_max", v.ngram_max}};
}

StageDef stage_def(std::string_view name, const PipelineConfig& c) {
  const auto j = c.to_json();
  StageDef d;
  if (name == "extract") {
    if (c.dump.empty()) throw UserError("no dump given; set `dump` in the config or pass --dump");
    if (!fs::exists(c.dump)) throw UserError("dump not found: " + c.dump.string());
    d.external = {c.dump, templates_file(c), aliases_dir(c)};
    d.config = {{"max_statement_words", c.vocab.max_statement_words}};
  } else if (name == "map") {
    d.deps = {"extract"};
    d.external = {templates_file(c), aliases_dir(c)};
    d.inputs = {"citations.jsonl"};
  } else if (name == "label") {
    d.deps = {"map"};
    d.inputs = {"uniform.jsonl"};
    d.config = j["label"];
  } else if (name == "pretrain-chars" || name == "train") {
    d.deps = {"label"};
    d.inputs = {"train.jsonl"};
    d.external = {tagger_source(c)};
    d.config = {{"features", j["features"]}, {"model", j["model"]}, {"train", j["train"]}};
    if (name == "train" && c.use_pretrained_chars) {
      d.deps.push_back("pretrain-chars");
      d.inputs.push_back("chars.ckpt");
    }
    if (name == "train" && !c.word_vectors.empty()) d.external.push_back(c.word_vectors);
  } else if (name == "evaluate") {
    d.deps = {"label", "train"};
    d.inputs = {"train.jsonl", "vocab.json", "model.ckpt", "split.json"};
    d.external = {tagger_source(c)};
    d.config = {{"tagger", c.tagger}};
  } else if (name == "classify") {
    d.deps = {"label", "train"};
    d.inputs = {"unlabeled.jsonl", "vocab.json", "model.ckpt"};
    d.external = {tagger_source(c)};
    d.config = {{"tagger", c.tagger}};
  } else if (name == "lookup") {
    d.deps = {"label", "classify"};
    d.inputs = {"unlabeled.jsonl", "predictions.jsonl"};
    if (!c.replay.empty()) d.external.push_back(c.replay);
    if (!c.gold.empty()) d.external.push_back(c.gold);
    d.config = j["lookup"];
    d.config["seed"] = c.label_seed;
  } else if (name == "report") {
    d.deps = {"extract", "map", "classify", "lookup"};
    d.inputs = {"extract_stats.json", "uniform.jsonl", "predictions.jsonl", "enrichment.jsonl"};
    d.config = j["report"];
  } else {
    throw UserError("unknown stage '" + std::string(name) + "'");
  }
  return d;
}

nlohmann::ordered_json read_manifest(const fs::path& p) {
  try {
    return nlohmann::ordered_json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw UserError("manifest " + p.string() + " is unreadable: " + e.what());
  }
}

void verify_upstream(const PipelineConfig& c, std::string_view stage, const std::string& dep) {
  const auto mp = manifest_path(c, dep);
  if (!fs::exists(mp))
    throw DependencyError("stage '" + std::string(stage) + "' needs the outputs of '" + dep + "'; run `wikicite " +
                          dep + "` first");
  const auto m = read_manifest(mp);
  for (const auto& [rel, info] : m.at("outputs").items()) {
    const auto p = c.out_dir / rel;
    if (!fs::exists(p))
      throw DependencyError(p.string() + " is missing although stage '" + dep + "' wrote it; re-run `wikicite " +
                            dep + "`");
    if (sha256_file(p) != info.at("sha256").get<std::string>())
      throw DependencyError(p.string() + " changed after stage '" + dep + "' wrote it (hash mismatch); re-run `wikicite " +
                            dep + "`");
  }
}

bool outputs_current(const PipelineConfig& c, const nlohmann::ordered_json& m) {
  for (const auto& [rel, info] : m.at("outputs").items()) {
    const auto p = c.out_dir / rel;
    if (!fs::exists(p) || sha256_file(p) != info.at("sha256").get<std::string>()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Stages. Each returns the out_dir-relative paths it wrote.

using Outputs = std::vector<std::string>;

Outputs stage_extract(const PipelineConfig& c) {
  const auto registry = TemplateRegistry::load(templates_file(c));
  const auto aliases = AliasTable::load_dir(aliases_dir(c));
  PageStream pages(DumpSource::file(c.dump));
  ExtractStats es;
  MapStats ms;
  std::uint64_t articles = 0, citations = 0, pages_with_citations = 0;
  AtomicFile out(c.out_dir / "citations.jsonl");
  while (auto page = pages.next()) {
    if (!is_citable_article(*page)) continue;
    ++articles;
    const auto raws = extract_citations(*page, registry, c.vocab.max_statement_words, &es);
    if (!raws.empty()) ++pages_with_citations;
    for (const auto& raw : raws) {
      out.out() << to_json(make_record(raw, registry, aliases, &ms)).dump() << "\n";
      ++citations;
    }
  }
  out.commit();
  nlohmann::ordered_json stats = {{"pages_read", pages.counters().pages},
                                  {"pages_skipped_missing_text", pages.counters().skipped_missing_text},
                                  {"articles", articles},
                                  {"pages_with_citations", pages_with_citations},
                                  {"citations", citations},
                                  {"template_calls_seen", es.calls_seen},
                                  {"duplicates_dropped", es.duplicates_dropped},
                                  {"ref_reuse_dropped", es.ref_reuse_dropped},
                                  {"dropped_params", ms.dropped_params},
                                  {"rejected_ids", ms.rejected_ids},
                                  {"unknown_kind_ids", ms.unknown_kind_ids},
                                  {"extra_id_values", ms.extra_id_values}};
  write_file_atomic(c.out_dir / "extract_stats.json", stats.dump(2) + "\n");
  log::get().info("event=extract_done articles={} citations={}", articles, citations);
  return {"citations.jsonl", "extract_stats.json"};
}

Outputs stage_map(const PipelineConfig& c) {
  const auto registry = TemplateRegistry::load(templates_file(c));
  const auto aliases = AliasTable::load_dir(aliases_dir(c));
  MapStats ms;
  std::uint64_t unparseable = 0, unsupported = 0;
  AtomicFile jsonl(c.out_dir / "uniform.jsonl");
  AtomicFile csv(c.out_dir / "uniform.csv");
  csv.out() << csv_header() << "\n";
  read_jsonl(c.out_dir / "citations.jsonl", [&](const nlohmann::json& j) {
    auto r = record_from_json(j);
    const auto call = parse_template_call(r.template_text, Span{0, r.template_text.size()});
    if (!call) {
      ++unparseable;
      return;
    }
    try {
      r.citation = map_to_uniform(*call, registry, aliases, &ms);
    } catch (const UnsupportedTemplate&) {
      ++unsupported;
      return;
    }
    jsonl.out() << to_json(r).dump() << "\n";
    csv.out() << to_csv_row(r) << "\n";
  });
  jsonl.commit();
  csv.commit();
  nlohmann::ordered_json stats = {{"mapped", ms.mapped},
                                  {"dropped_params", ms.dropped_params},
                                  {"rejected_ids", ms.rejected_ids},
                                  {"unknown_kind_ids", ms.unknown_kind_ids},
                                  {"extra_id_values", ms.extra_id_values},
                                  {"unparseable", unparseable},
                                  {"unsupported_template", unsupported}};
  write_file_atomic(c.out_dir / "map_stats.json", stats.dump(2) + "\n");
  return {"uniform.jsonl", "uniform.csv", "map_stats.json"};
}

Outputs stage_label(const PipelineConfig& c) {
  std::vector<CitationRecord> records;
  read_jsonl(c.out_dir / "uniform.jsonl", [&](const nlohmann::json& j) { records.push_back(record_from_json(j)); });
  const auto outcome = label_corpus(std::move(records), c.targets, c.label_seed);
  AtomicFile un(c.out_dir / "unlabeled.jsonl");
  for (const auto& r : outcome.unlabeled) un.out() << to_json(r).dump() << "\n";
  un.commit();
  std::map<std::string, std::size_t> pool, sampled;
  for (const auto& [label, n] : outcome.pool) pool[std::string(to_string(label))] = n;
  AtomicFile out(c.out_dir / "train.jsonl");
  for (const auto& l : outcome.train) {
    if (!is_leakage_free(l.record.citation)) throw std::logic_error("leakage field survived stripping");
    ++sampled[std::string(to_string(l.label))];
    out.out() << to_json(l).dump() << "\n";
  }
  out.commit();
  nlohmann::ordered_json stats = {{"by_rule", outcome.by_rule},
                                  {"labeled_pool", pool},
                                  {"sampled", sampled},
                                  {"low_information_dropped", outcome.low_information},
                                  {"unlabeled", outcome.unlabeled.size()}};
  write_file_atomic(c.out_dir / "label_stats.json", stats.dump(2) + "\n");
  return {"train.jsonl", "unlabeled.jsonl", "label_stats.json"};
}

std::vector<LabeledCitation> load_training(const PipelineConfig& c) {
  std::vector<LabeledCitation> out;
  read_jsonl(c.out_dir / "train.jsonl", [&](const nlohmann::json& j) { out.push_back(labeled_from_json(j)); });
  return out;
}

// Vocabulary from the training side of the split `train` will make.
Vocabulary training_vocabulary(const PipelineConfig& c, const std::vector<LabeledCitation>& data,
                               const PosTagger& tagger) {
  std::vector<ClassLabel> labels;
  for (const auto& l : data) labels.push_back(l.label);
  const auto split = stratified_split(labels, c.train.test_fraction, c.train.seed);
  std::vector<CitationRecord> records;
  for (auto i : split.train) records.push_back(data[i].record);
  return build_vocabulary(records, tagger, c.vocab);
}

std::vector<Example> featurize_all(const std::vector<LabeledCitation>& data, const Vocabulary& v,
                                   const PosTagger& tagger) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const auto& l : data) out.push_back({featurize(l.record, v, tagger), l.label});
  return out;
}

Outputs stage_pretrain(const PipelineConfig& c) {
  const auto tagger = make_tagger(c.tagger, tagger_source(c));
  const auto data = load_training(c);
  const auto vocab = training_vocabulary(c, data, *tagger);
  const auto examples = featurize_all(data, vocab, *tagger);
  auto params = init_model(c.model, vocab, c.train.seed);
  params.chars = pretrain_char_embeddings(examples, c.model, c.train, vocab);
  save_checkpoint(params, c.out_dir / "chars.ckpt");
  return {"chars.ckpt"};
}

Outputs stage_train(const PipelineConfig& c) {
  const auto tagger = make_tagger(c.tagger, tagger_source(c));
  const auto data = load_training(c);
  const auto vocab = training_vocabulary(c, data, *tagger);
  const auto examples = featurize_all(data, vocab, *tagger);
  std::optional<ModelParams> initial;
  if (c.use_pretrained_chars) {
    auto pre = load_checkpoint(c.out_dir / "chars.ckpt");
    if (pre.vocab_hash != vocab.hash())
      throw UserError("chars.ckpt was built with a different vocabulary; re-run `wikicite pretrain-chars`");
    initial = init_model(c.model, vocab, c.train.seed);
    initial->chars = std::move(pre.chars);
  }
  if (!c.word_vectors.empty()) {
    if (!initial) initial = init_model(c.model, vocab, c.train.seed);
    const auto n = import_word_vectors(*initial, vocab, c.word_vectors);
    log::get().info("event=word_vectors_imported rows={}", n);
  }
  const auto result = train(examples, c.model, c.train, vocab, initial);
  vocab.save(c.out_dir / "vocab.json");
  save_checkpoint(result.params, c.out_dir / "model.ckpt");
  std::string metrics;
  for (const auto& e : result.epochs) {
    nlohmann::ordered_json j = {{"epoch", e.epoch},
                                {"train_loss", e.train_loss},
                                {"test_accuracy", e.test_accuracy},
                                {"learning_rate", e.learning_rate}};
    metrics += j.dump() + "\n";
  }
  write_file_atomic(c.out_dir / "metrics.jsonl", metrics);
  nlohmann::ordered_json split = {{"train", result.split.train}, {"test", result.split.test}};
  write_file_atomic(c.out_dir / "split.json", split.dump() + "\n");
  return {"vocab.json", "model.ckpt", "metrics.jsonl", "split.json"};
}

Outputs stage_evaluate(const PipelineConfig& c) {
  const auto tagger = make_tagger(c.tagger, tagger_source(c));
  const auto data = load_training(c);
  const auto vocab = Vocabulary::load(c.out_dir / "vocab.json");
  const auto params = load_checkpoint(c.out_dir / "model.ckpt");
  if (params.vocab_hash != vocab.hash()) throw UserError("model.ckpt and vocab.json disagree; re-run `wikicite train`");
  const auto split = nlohmann::json::parse(read_file(c.out_dir / "split.json"));
  std::vector<Example> test;
  for (auto i : split.at("test").get<std::vector<std::size_t>>()) {
    if (i >= data.size()) throw UserError("split.json does not match train.jsonl; re-run `wikicite train`");
    test.push_back({featurize(data[i].record, vocab, *tagger), data[i].label});
  }
  const auto ev = evaluate(params, test);
  write_file_atomic(c.out_dir / "evaluation.json", ev.to_json().dump(2) + "\n");
  log::get().info("event=evaluation accuracy={:.4f} test_size={}", ev.accuracy, ev.total);
  return {"evaluation.json"};
}

Outputs stage_classify(const PipelineConfig& c) {
  const auto tagger = make_tagger(c.tagger, tagger_source(c));
  const auto vocab = Vocabulary::load(c.out_dir / "vocab.json");
  const auto params = load_checkpoint(c.out_dir / "model.ckpt");
  if (params.vocab_hash != vocab.hash()) throw UserError("model.ckpt and vocab.json disagree; re-run `wikicite train`");
  AtomicFile out(c.out_dir / "predictions.jsonl");
  read_jsonl(c.out_dir / "unlabeled.jsonl", [&](const nlohmann::json& j) {
    const auto r = record_from_json(j);
    const auto p = forward(params, featurize(r, vocab, *tagger));
    nlohmann::ordered_json row = {{"key", record_key(r)},
                                  {"label", std::string(to_string(p.label))},
                                  {"probs", p.probs}};
    out.out() << row.dump() << "\n";
  });
  out.commit();
  return {"predictions.jsonl"};
}

std::map<std::string, ClassLabel> load_predictions(const PipelineConfig& c) {
  std::map<std::string, ClassLabel> out;
  read_jsonl(c.out_dir / "predictions.jsonl", [&](const nlohmann::json& j) {
    const auto label = parse_class_label(j.at("label").get<std::string>());
    if (!label) throw UserError("predictions.jsonl holds an unknown label");
    out[j.at("key").get<std::string>()] = *label;
  });
  return out;
}

Outputs stage_lookup(const PipelineConfig& c) {
  auto cfg = c.lookup;
  if (cfg.cache_dir.empty()) cfg.cache_dir = c.out_dir / "cache";
  std::unique_ptr<Transport> transport;
  std::unique_ptr<Clock> clock;
  if (!c.replay.empty()) {
    transport = std::make_unique<ReplayTransport>(ReplayTransport::load(c.replay));
    clock = std::make_unique<SimulatedClock>();
  } else {
    transport = std::make_unique<HttpTransport>(cfg);
    clock = std::make_unique<SystemClock>();
  }
  CrossrefClient client(cfg, *transport, *clock);

  const auto predicted_by_key = load_predictions(c);
  std::vector<CitationRecord> records;
  std::vector<ClassLabel> predicted;
  read_jsonl(c.out_dir / "unlabeled.jsonl", [&](const nlohmann::json& j) {
    auto r = record_from_json(j);
    auto it = predicted_by_key.find(record_key(r));
    if (it == predicted_by_key.end()) throw UserError("no prediction for " + record_key(r) + "; re-run `wikicite classify`");
    predicted.push_back(it->second);
    records.push_back(std::move(r));
  });
  EnrichmentReport rep;
  const auto enriched = enrich_corpus(records, predicted, client, cfg, &rep);
  std::string lines;
  for (const auto& e : enriched) lines += to_json(e).dump() + "\n";
  write_file_atomic(c.out_dir / "enrichment.jsonl", lines);
  write_file_atomic(c.out_dir / "lookup_report.json", rep.to_json().dump(2) + "\n");
  Outputs outs = {"enrichment.jsonl", "lookup_report.json"};

  if (!c.gold.empty()) {
    const auto gold = load_gold(c.gold);
    std::vector<LookupQuery> queries;
    for (const auto& g : gold) queries.push_back(g.query);
    const auto results = fetch_all(client, queries, cfg.workers);
    const auto h = evaluate_heuristics(gold, results, c.tuning_fraction, c.label_seed);
    write_file_atomic(c.out_dir / "heuristics.json", h.to_json().dump(2) + "\n");
    outs.push_back("heuristics.json");
  }
  log::get().info("event=lookup_done eligible={} enriched={} network_calls={}", rep.eligible, rep.enriched,
                  rep.network_calls);
  return outs;
}

std::optional<HeuristicReport> load_heuristics(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_file(p));
  auto point = [](const nlohmann::json& x) {
    ThresholdPoint t;
    t.threshold = x.at("threshold").get<double>();
    t.predicted = x.at("predicted").get<std::size_t>();
    t.true_positive = x.at("true_positive").get<std::size_t>();
    t.precision = x.at("precision").get<double>();
    t.recall = x.at("recall").get<double>();
    return t;
  };
  HeuristicReport h;
  for (const auto& g : j.at("grid")) h.grid.push_back(point(g));
  if (!j.at("chosen").is_null()) h.chosen = point(j.at("chosen"));
  return h;
}

Outputs stage_report(const PipelineConfig& c) {
  const auto predicted = load_predictions(c);
  std::map<std::string, std::string> new_dois;
  read_jsonl(c.out_dir / "enrichment.jsonl", [&](const nlohmann::json& j) {
    if (j.at("status").get<std::string>() == "NEW_DOI") new_dois[j.at("key").get<std::string>()] = j.at("doi").get<std::string>();
  });
  std::vector<CorpusEntry> corpus;
  read_jsonl(c.out_dir / "uniform.jsonl", [&](const nlohmann::json& j) {
    CorpusEntry e;
    e.record = record_from_json(j);
    const auto key = record_key(e.record);
    if (auto known = assign_label(e.record.citation)) {
      e.label = *known;
      e.known = true;
    } else if (auto it = predicted.find(key); it != predicted.end()) {
      e.label = it->second;
    } else {
      throw UserError("citation " + key + " has neither a rule label nor a prediction; re-run `wikicite classify`");
    }
    if (auto it = new_dois.find(key); it != new_dois.end()) e.new_doi = it->second;
    corpus.push_back(std::move(e));
  });
  const auto es = nlohmann::json::parse(read_file(c.out_dir / "extract_stats.json"));
  const auto stats = compute_stats(corpus, es.at("articles").get<std::size_t>(), c.report);
  const auto dir = c.out_dir / "report";
  std::error_code ec;
  fs::remove_all(dir, ec);
  Outputs outs;
  for (const auto& f : emit_report(stats, c.report, load_heuristics(c.out_dir / "heuristics.json"), dir))
    outs.push_back("report/" + f);
  return outs;
}

Outputs dispatch(std::string_view name, const PipelineConfig& c) {
  if (name == "extract") return stage_extract(c);
  if (name == "map") return stage_map(c);
  if (name == "label") return stage_label(c);
  if (name == "pretrain-chars") return stage_pretrain(c);
  if (name == "train") return stage_train(c);
  if (name == "evaluate") return stage_evaluate(c);
  if (name == "classify") return stage_classify(c);
  if (name == "lookup") return stage_lookup(c);
  return stage_report(c);
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json targets_j = nlohmann::ordered_json::object();
  for (const auto& [k, n] : targets) targets_j[std::string(wikicite::to_string(k))] = n;
  j["label"] = {{"targets", targets_j}, {"seed", label_seed}};
  j["features"] = vocab_json(vocab);
  j["features"]["tagger"] = tagger;
  j["model"] = {{"char_embed_dim", model.char_embed_dim},
                {"token_embed_dim", model.token_embed_dim},
                {"statement_encoder_dim", model.statement_encoder_dim},
                {"hidden_layers", model.hidden_layers},
                {"dropout", model.dropout},
                {"encoder", std::string(wikicite::to_string(model.encoder))},
                {"activation", std::string(wikicite::to_string(model.activation))},
                {"loss", std::string(wikicite::to_string(model.loss))},
                {"freeze_chars", model.freeze_chars}};
  j["train"] = {{"epochs", train.epochs},
                {"test_fraction", train.test_fraction},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"epsilon", train.epsilon},
                {"learning_rate", train.initial_lr},
                {"min_learning_rate", train.min_lr},
                {"patience", train.patience},
                {"lr_factor", train.lr_factor},
                {"batch_size", train.batch_size},
                {"seed", train.seed},
                {"pretrained_chars", use_pretrained_chars}};
  j["lookup"] = {{"threshold", lookup.score_threshold},
                 {"rps", lookup.max_rps},
                 {"retained_results", lookup.retained_results},
                 {"max_attempts", lookup.max_attempts},
                 {"backoff", lookup.backoff_initial_s},
                 {"endpoint", lookup.endpoint},
                 {"replay", !replay.empty()},
                 {"tuning_fraction", tuning_fraction}};
  j["report"] = {{"first_year", report.first_year},
                 {"last_year", report.last_year},
                 {"smoothing_window", report.smoothing_window},
                 {"smoothing", report.trailing_smoothing ? "trailing" : "centered"},
                 {"top_journals", report.top_journals},
                 {"csv", report.csv},
                 {"png", report.png}};
  return j;
}

PipelineConfig parse_config(const std::string& yaml_text, const fs::path& base_dir) {
  return parse_config_at(yaml_text, base_dir);
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw UserError("config file not found: " + path.string());
  return parse_config_at(read_file(path), path.parent_path());
}

fs::path manifest_path(const PipelineConfig& cfg, std::string_view stage) {
  return cfg.out_dir / "manifests" / (std::string(stage) + ".json");
}

StageResult run_stage(std::string_view name, const PipelineConfig& cfg) {
  if (std::find(kStages.begin(), kStages.end(), name) == kStages.end())
    throw UserError("unknown stage '" + std::string(name) + "'");
  fs::create_directories(cfg.out_dir / "manifests");
  const StageDef def = stage_def(name, cfg);
  for (const auto& dep : def.deps) verify_upstream(cfg, name, dep);

  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& p : def.external) {
    if (!fs::exists(p)) throw UserError("input not found: " + p.string());
    inputs[p.string()] = hash_path(p);
  }
  for (const auto& rel : def.inputs) inputs[rel] = sha256_file(cfg.out_dir / rel);
  const std::string config_hash = sha256_hex(def.config.dump());

  StageResult result;
  result.stage = std::string(name);
  const auto mp = manifest_path(cfg, name);
  if (fs::exists(mp)) {
    const auto old = read_manifest(mp);
    if (old.value("config_hash", "") == config_hash && old.at("inputs") == inputs && outputs_current(cfg, old)) {
      log::get().info("event=stage_skip stage={} reason=up_to_date", name);
      result.skipped = true;
      result.manifest = old;
      return result;
    }
  }

  log::get().info("event=stage_start stage={}", name);
  // A stale manifest must not vouch for half-written outputs.
  std::error_code ec;
  fs::remove(mp, ec);
  const Outputs outs = dispatch(name, cfg);

  nlohmann::ordered_json m;
  m["stage"] = std::string(name);
  m["version"] = 1;
  m["config_hash"] = config_hash;
  m["inputs"] = inputs;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  for (const auto& rel : outs) {
    const auto p = cfg.out_dir / rel;
    nlohmann::ordered_json o = {{"sha256", sha256_file(p)}};
    const auto ext = p.extension().string();
    if (ext == ".jsonl") o["rows"] = count_rows(p);
    else if (ext == ".csv") o["rows"] = count_rows(p) - 1;
    outputs[rel] = o;
  }
  m["outputs"] = outputs;
  write_file_atomic(mp, m.dump(2) + "\n");
  log::get().info("event=stage_done stage={} outputs={}", name, outs.size());
  result.manifest = m;
  return result;
}

std::vector<StageResult> run_all(const PipelineConfig& cfg) {
  std::vector<StageResult> out;
  for (auto stage : kStages) {
    if (stage == "pretrain-chars" && !cfg.use_pretrained_chars) continue;
    out.push_back(run_stage(stage, cfg));
  }
  return out;
}

}  // namespace wikicite
