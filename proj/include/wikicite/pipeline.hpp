#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wikicite/classifier.hpp"
#include "wikicite/crossref.hpp"
#include "wikicite/features.hpp"
#include "wikicite/labels.hpp"
#include "wikicite/report.hpp"

namespace wikicite {

struct PipelineConfig {
  std::filesystem::path dump;
  std::filesystem::path out_dir = "out";
  std::filesystem::path templates;  // empty: shipped list
  std::filesystem::path aliases;    // empty: shipped tables
  std::string log_level = "info";
  std::size_t workers = 4;

  SampleTargets targets;
  std::uint64_t label_seed = 42;

  VocabConfig vocab;
  std::string tagger = "rule";
  std::filesystem::path tagger_path;  // empty: shipped rule data

  ModelConfig model;
  TrainConfig train;
  bool use_pretrained_chars = false;
  std::filesystem::path word_vectors;

  LookupConfig lookup;
  std::filesystem::path replay;
  std::filesystem::path gold;  // optional (query, DOI) pairs for the heuristic evaluation
  double tuning_fraction = 0.8;

  ReportConfig report;

  // Section-wise views used for stage config hashes.
  nlohmann::ordered_json to_json() const;
};

// Parses YAML text. Every unknown key and every out-of-range value is collected, then
// reported together in one ConfigError. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

inline constexpr std::array<std::string_view, 9> kStages = {"extract",  "map",      "label",  "pretrain-chars", "train",
                                                           "evaluate", "classify", "lookup", "report"};

struct StageResult {
  std::string stage;
  bool skipped = false;  // outputs already current
  nlohmann::ordered_json manifest;
};

// Runs one stage. Throws DependencyError when an upstream stage has not run or its
// outputs changed after it wrote them.
StageResult run_stage(std::string_view name, const PipelineConfig& cfg);

// Every stage in order; pretrain-chars only when the config asks for it.
std::vector<StageResult> run_all(const PipelineConfig& cfg);

std::filesystem::path manifest_path(const PipelineConfig& cfg, std::string_view stage);

}  // namespace wikicite
