#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wikicite/features.hpp"
#include "wikicite/labels.hpp"

namespace wikicite {

enum class EncoderKind { kPooled, kRecurrent };
enum class Activation { kRelu, kTanh };
// Categorical cross-entropy, or mean per-class binary cross-entropy on the softmax outputs.
enum class LossKind { kCategorical, kBinary };

std::string_view to_string(EncoderKind k);
std::string_view to_string(Activation a);
std::string_view to_string(LossKind l);
std::optional<EncoderKind> parse_encoder_kind(std::string_view s);
std::optional<Activation> parse_activation(std::string_view s);
std::optional<LossKind> parse_loss_kind(std::string_view s);

struct ModelConfig {
  int char_embed_dim = 300;
  int token_embed_dim = 300;
  int statement_encoder_dim = 64;
  std::vector<int> hidden_layers = {512, 256, 128, 64};
  int classes = 3;
  double dropout = 0.1;
  EncoderKind encoder = EncoderKind::kRecurrent;
  Activation activation = Activation::kRelu;
  LossKind loss = LossKind::kCategorical;
  bool freeze_chars = false;

  std::vector<std::string> violations() const;
  void validate() const;  // throws ConfigError
};

struct TrainConfig {
  int epochs = 5;
  double test_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double initial_lr = 1e-3;
  double min_lr = 1e-5;
  int patience = 1;
  double lr_factor = 0.5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;

  std::vector<std::string> violations() const;
  void validate() const;
};

// Embedding rows are created on first use. A row that was never written reads as its
// deterministic initial value, so huge hashed tables cost memory only for rows in use.
class EmbeddingTable {
public:
  EmbeddingTable() = default;
  EmbeddingTable(int dim, std::uint64_t seed, double scale) : dim_(dim), seed_(seed), scale_(scale) {}

  int dim() const { return dim_; }
  Eigen::VectorXd row(int id) const;
  Eigen::VectorXd& mutable_row(int id);
  void set_row(int id, Eigen::VectorXd v);
  const std::map<int, Eigen::VectorXd>& stored() const { return rows_; }
  std::uint64_t seed() const { return seed_; }
  double scale() const { return scale_; }

private:
  Eigen::VectorXd initial(int id) const;

  int dim_ = 0;
  std::uint64_t seed_ = 0;
  double scale_ = 0.05;
  std::map<int, Eigen::VectorXd> rows_;
};

struct DenseParam {
  std::string name;
  Eigen::MatrixXd value;
};

struct ModelParams {
  ModelConfig config;
  std::string vocab_hash;
  int pos_dim = 0;
  int section_dim = 0;
  EmbeddingTable chars;
  EmbeddingTable tokens;
  EmbeddingTable subwords;
  std::vector<DenseParam> dense;

  const Eigen::MatrixXd& get(std::string_view name) const;
  Eigen::MatrixXd& get(std::string_view name);
  int input_dim() const;
  bool operator==(const ModelParams& o) const;
};

ModelParams init_model(const ModelConfig& config, const Vocabulary& vocab, std::uint64_t seed);

struct Prediction {
  std::array<double, 3> probs{};
  ClassLabel label = ClassLabel::kBook;
  double max_prob = 0.0;
};

struct Example {
  FeatureVector fv;
  ClassLabel label = ClassLabel::kBook;
};

// Representation of the citation text: char embeddings summed and scaled to unit L1 norm.
Eigen::VectorXd char_representation(const ModelParams& p, const std::vector<int>& char_ids);

Prediction forward(const ModelParams& p, const FeatureVector& fv);
std::vector<double> logits(const ModelParams& p, const FeatureVector& fv);
std::array<double, 3> softmax3(const std::vector<double>& z);

struct Gradients {
  std::vector<Eigen::MatrixXd> dense;
  std::map<int, Eigen::VectorXd> chars;
  std::map<int, Eigen::VectorXd> tokens;
  std::map<int, Eigen::VectorXd> subwords;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Mean loss over the batch and its exact gradient. Dropout is applied only when `rng`
// is given.
double loss_and_grad(const ModelParams& p, const std::vector<const Example*>& batch, Gradients* grads,
                     std::mt19937_64* rng = nullptr);
double loss_and_grad(const ModelParams& p, const std::vector<Example>& batch, Gradients* grads,
                     std::mt19937_64* rng = nullptr);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
// Class-stratified split; the test size is round(n * fraction) distributed across classes
// by largest remainder.
Split stratified_split(const std::vector<ClassLabel>& labels, double test_fraction, std::uint64_t seed);

struct Evaluation {
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
  std::array<double, 3> recall{};
  double accuracy = 0.0;
  std::size_t total = 0;

  nlohmann::ordered_json to_json() const;
};

Evaluation evaluate(const ModelParams& p, const std::vector<Example>& test);
Evaluation evaluate_predictions(const std::vector<ClassLabel>& truth, const std::vector<ClassLabel>& predicted);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> epochs;
  Split split;
  Evaluation final_eval;
};

// `initial` seeds the run (for example with pretrained char embeddings); otherwise the
// model is initialised from the train seed. `on_epoch` sees the params after each epoch.
TrainResult train(const std::vector<Example>& data, const ModelConfig& mc, const TrainConfig& tc,
                  const Vocabulary& vocab, std::optional<ModelParams> initial = std::nullopt,
                  const std::function<void(const ModelParams&, const EpochMetrics&)>& on_epoch = {});

// Two-class book-or-journal versus web task on the char path alone. Returns the char table.
EmbeddingTable pretrain_char_embeddings(const std::vector<Example>& data, const ModelConfig& mc,
                                        const TrainConfig& tc, const Vocabulary& vocab);

std::vector<Prediction> predict_batch(const ModelParams& p, const std::vector<FeatureVector>& fvs);

void save_checkpoint(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Plain-text vectors, "word v1 ... vd" per line (an optional "count dim" header line is
// skipped). Rows are installed for words in the vocabulary; returns how many.
std::size_t import_word_vectors(ModelParams& p, const Vocabulary& vocab, const std::filesystem::path& path);

}  // namespace wikicite
