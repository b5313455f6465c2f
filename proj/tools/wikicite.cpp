// wikicite: stage-by-stage driver for the citation pipeline.
//
//   wikicite --config pipeline.yaml all
//   wikicite --config pipeline.yaml --dump enwiki.xml.bz2 extract
//   wikicite --config pipeline.yaml lookup --replay replay.jsonl --threshold 34.997
//
// Exit codes: 0 success, 1 user or configuration error, 2 internal error.

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include "wikicite/common.hpp"
#include "wikicite/log.hpp"
#include "wikicite/pipeline.hpp"
#include "wikicite/pos_tagger.hpp"

namespace fs = std::filesystem;
using namespace wikicite;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> dump, out, templates, aliases, log_level;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> targets;
  std::optional<std::size_t> min_count, max_statement_words, pos_top, sections_top;
  std::optional<int> epochs;
  std::optional<std::string> encoder;
  std::optional<double> threshold;
  std::optional<int> rps;
  std::optional<std::string> cache, replay, gold;
  std::optional<std::string> formats;
  std::optional<std::string> smoothing;
};

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// Flags are folded into the YAML document so they go through the same validation.
PipelineConfig resolve(const Overrides& o) {
  YAML::Node root;
  fs::path base;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UserError("config file not found: " + o.config);
    try {
      root = YAML::LoadFile(o.config);
    } catch (const YAML::Exception& e) {
      throw ConfigError({std::string("config is not valid YAML: ") + e.what()});
    }
    base = fs::absolute(o.config).parent_path();
  }
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (o.dump) root["dump"] = absolute(*o.dump);
  if (o.out) root["out_dir"] = absolute(*o.out);
  if (o.templates) root["templates"] = absolute(*o.templates);
  if (o.aliases) root["aliases"] = absolute(*o.aliases);
  if (o.log_level) root["log_level"] = *o.log_level;
  if (o.workers) root["workers"] = *o.workers;
  if (o.seed) root["seed"] = *o.seed;
  if (o.targets) root["label"]["targets"] = *o.targets;
  if (o.min_count) root["features"]["min_count"] = *o.min_count;
  if (o.max_statement_words) root["features"]["max_statement_words"] = *o.max_statement_words;
  if (o.pos_top) root["features"]["pos_top"] = *o.pos_top;
  if (o.sections_top) root["features"]["sections_top"] = *o.sections_top;
  if (o.epochs) root["train"]["epochs"] = *o.epochs;
  if (o.encoder) root["model"]["encoder"] = *o.encoder;
  if (o.threshold) root["lookup"]["threshold"] = *o.threshold;
  if (o.rps) root["lookup"]["rps"] = *o.rps;
  if (o.cache) root["lookup"]["cache"] = absolute(*o.cache);
  if (o.replay) root["lookup"]["replay"] = absolute(*o.replay);
  if (o.gold) root["lookup"]["gold"] = absolute(*o.gold);
  if (o.formats) root["report"]["formats"] = *o.formats;
  if (o.smoothing) root["report"]["smoothing"] = *o.smoothing;
  YAML::Emitter em;
  em << root;
  return parse_config(em.c_str(), base);
}

int train_tagger(const std::string& input, const std::string& output, int iterations, std::uint64_t seed) {
  // One token per line as "word TAG"; blank lines end sentences.
  std::vector<PerceptronTagger::Sentence> sentences(1);
  for_each_line(input, [&](std::string_view line, std::size_t no) {
    const auto t = text::trim(line);
    if (t.empty()) {
      if (!sentences.back().empty()) sentences.emplace_back();
      return;
    }
    const auto parts = text::split_words(t);
    if (parts.size() != 2) throw UserError(input + ":" + std::to_string(no) + ": expected \"word TAG\"");
    sentences.back().emplace_back(parts[0], parts[1]);
  });
  if (sentences.back().empty()) sentences.pop_back();
  if (sentences.empty()) throw UserError(input + " holds no tagged sentences");
  PerceptronTagger tagger;
  tagger.train(sentences, iterations, seed);
  tagger.save(output);
  log::get().info("event=tagger_trained sentences={} output={}", sentences.size(), output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extract, classify and reconcile citations from a MediaWiki dump."};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("-c,--config", o.config, "YAML pipeline config");
  app.add_option("--dump", o.dump, "pages-articles XML dump (.xml, .gz or .bz2)");
  app.add_option("-o,--out", o.out, "output directory");
  app.add_option("--templates", o.templates, "supported template list");
  app.add_option("--aliases", o.aliases, "directory of parameter alias tables");
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn or error");
  app.add_option("--workers", o.workers, "worker threads");
  app.add_option("--seed", o.seed, "seed for sampling, splitting and initialisation");
  app.add_option("--targets", o.targets, "label sample sizes, book=N,web=N,journal=N");
  app.add_option("--min-count", o.min_count, "minimum token count for the vocabulary");
  app.add_option("--max-statement-words", o.max_statement_words, "statement words kept per citation");
  app.add_option("--pos-top", o.pos_top, "POS tags counted");
  app.add_option("--sections-top", o.sections_top, "sections one-hot encoded");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--encoder", o.encoder, "statement encoder, pooled or recurrent");
  app.add_option("--threshold", o.threshold, "Crossref score threshold");
  app.add_option("--rps", o.rps, "maximum Crossref requests per second");
  app.add_option("--cache", o.cache, "Crossref response cache directory");
  app.add_option("--replay", o.replay, "recorded Crossref responses to serve instead of the network");
  app.add_option("--gold", o.gold, "(title, author, doi) pairs for the heuristic evaluation");
  app.add_option("--formats", o.formats, "report formats, csv,png");
  app.add_option("--smoothing", o.smoothing, "year smoothing, centered or trailing");

  std::vector<CLI::App*> stage_cmds;
  for (auto stage : kStages) stage_cmds.push_back(app.add_subcommand(std::string(stage), "run the " + std::string(stage) + " stage"));
  auto* all = app.add_subcommand("all", "run every stage in order");
  auto* check = app.add_subcommand("check-config", "validate the config and print the resolved values");

  std::string tag_in, tag_out;
  int tag_iters = 5;
  auto* tagger_cmd = app.add_subcommand("train-tagger", "train the perceptron POS tagger");
  tagger_cmd->add_option("input", tag_in, "tagged corpus, \"word TAG\" per line")->required();
  tagger_cmd->add_option("output", tag_out, "weights file to write")->required();
  tagger_cmd->add_option("--iterations", tag_iters, "training passes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve(o);
    log::init(cfg.log_level);
    if (tagger_cmd->parsed()) return train_tagger(tag_in, tag_out, tag_iters, cfg.train.seed);
    if (check->parsed()) {
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    if (all->parsed()) {
      run_all(cfg);
      return 0;
    }
    for (std::size_t i = 0; i < kStages.size(); ++i)
      if (stage_cmds[i]->parsed()) run_stage(kStages[i], cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration errors:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return 1;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
