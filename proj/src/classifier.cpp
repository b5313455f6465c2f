#include "wikicite/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wikicite/log.hpp"

namespace wikicite {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = (2.0 * unit_rand(rng) - 1.0) * limit;
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_row(std::map<int, VectorXd>& grads, int id, const VectorXd& g) {
  auto it = grads.find(id);
  if (it == grads.end()) grads.emplace(id, g);
  else it->second += g;
}

constexpr char kMagic[8] = {'W', 'K', 'C', 'M', 'O', 'D', 'L', '1'};

}  // namespace

std::string_view to_string(EncoderKind k) { return k == EncoderKind::kPooled ? "pooled" : "recurrent"; }
std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }
std::string_view to_string(LossKind l) { return l == LossKind::kCategorical ? "categorical" : "binary"; }

std::optional<EncoderKind> parse_encoder_kind(std::string_view s) {
  const auto v = text::lower(s);
  if (v == "pooled") return EncoderKind::kPooled;
  if (v == "recurrent") return EncoderKind::kRecurrent;
  return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view s) {
  const auto v = text::lower(s);
  if (v == "relu") return Activation::kRelu;
  if (v == "tanh") return Activation::kTanh;
  return std::nullopt;
}

std::optional<LossKind> parse_loss_kind(std::string_view s) {
  const auto v = text::lower(s);
  if (v == "categorical") return LossKind::kCategorical;
  if (v == "binary") return LossKind::kBinary;
  return std::nullopt;
}

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (char_embed_dim <= 0) v.push_back("char_embed_dim must be positive");
  if (token_embed_dim <= 0) v.push_back("token_embed_dim must be positive");
  if (statement_encoder_dim <= 0) v.push_back("statement_encoder_dim must be positive");
  if (hidden_layers.size() != 4) v.push_back("hidden_layers must list exactly 4 widths");
  for (int w : hidden_layers)
    if (w <= 0) v.push_back("hidden layer widths must be positive");
  if (classes != 3) v.push_back("classes must be 3");
  if (!(dropout >= 0.0 && dropout < 1.0)) v.push_back("dropout must be in [0, 1)");
  return v;
}

void ModelConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ConfigError(std::move(v));
}

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> v;
  if (epochs < 1) v.push_back("epochs must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) v.push_back("test_fraction must be in (0, 1)");
  if (!(min_lr > 0.0 && min_lr <= initial_lr)) v.push_back("min_lr must satisfy 0 < min_lr <= initial_lr");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) v.push_back("Adam betas must be in [0, 1)");
  if (patience < 0) v.push_back("patience must be >= 0");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) v.push_back("lr_factor must be in (0, 1)");
  if (batch_size < 1) v.push_back("batch_size must be >= 1");
  return v;
}

void TrainConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ConfigError(std::move(v));
}

// ---------------------------------------------------------------------------

VectorXd EmbeddingTable::initial(int id) const {
  std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(id))));
  VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = (2.0 * unit_rand(rng) - 1.0) * scale_;
  return v;
}

VectorXd EmbeddingTable::row(int id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? initial(id) : it->second;
}

VectorXd& EmbeddingTable::mutable_row(int id) {
  auto it = rows_.find(id);
  if (it == rows_.end()) it = rows_.emplace(id, initial(id)).first;
  return it->second;
}

void EmbeddingTable::set_row(int id, VectorXd v) { rows_[id] = std::move(v); }

const MatrixXd& ModelParams::get(std::string_view name) const {
  for (const auto& d : dense)
    if (d.name == name) return d.value;
  throw std::logic_error("no parameter named " + std::string(name));
}

MatrixXd& ModelParams::get(std::string_view name) {
  return const_cast<MatrixXd&>(std::as_const(*this).get(name));
}

int ModelParams::input_dim() const {
  return config.char_embed_dim + config.statement_encoder_dim + pos_dim + section_dim + 2;
}

bool ModelParams::operator==(const ModelParams& o) const {
  if (!(config.hidden_layers == o.config.hidden_layers) || vocab_hash != o.vocab_hash ||
      pos_dim != o.pos_dim || section_dim != o.section_dim || dense.size() != o.dense.size())
    return false;
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i].name != o.dense[i].name || dense[i].value.rows() != o.dense[i].value.rows() ||
        dense[i].value.cols() != o.dense[i].value.cols() || dense[i].value != o.dense[i].value)
      return false;
  auto same_table = [](const EmbeddingTable& a, const EmbeddingTable& b) {
    if (a.dim() != b.dim() || a.seed() != b.seed() || a.stored().size() != b.stored().size()) return false;
    auto ib = b.stored().begin();
    for (const auto& [id, v] : a.stored()) {
      if (id != ib->first || v != ib->second) return false;
      ++ib;
    }
    return true;
  };
  return same_table(chars, o.chars) && same_table(tokens, o.tokens) && same_table(subwords, o.subwords);
}

ModelParams init_model(const ModelConfig& config, const Vocabulary& vocab, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.vocab_hash = vocab.hash();
  p.pos_dim = static_cast<int>(vocab.config.pos_top);
  p.section_dim = static_cast<int>(vocab.config.sections_top);
  p.chars = EmbeddingTable(config.char_embed_dim, splitmix64(seed ^ 0xC4A2), 0.05);
  p.tokens = EmbeddingTable(config.token_embed_dim, splitmix64(seed ^ 0x70C3), 0.05);
  p.subwords = EmbeddingTable(config.token_embed_dim, splitmix64(seed ^ 0x5B3D), 0.05);

  std::mt19937_64 rng(splitmix64(seed));
  const int h = config.statement_encoder_dim, dt = config.token_embed_dim;
  if (config.encoder == EncoderKind::kPooled) {
    p.dense.push_back({"enc.W", glorot(h, dt, rng)});
    p.dense.push_back({"enc.b", MatrixXd::Zero(h, 1)});
  } else {
    p.dense.push_back({"lstm.Wx", glorot(4 * h, dt, rng)});
    p.dense.push_back({"lstm.Wh", glorot(4 * h, h, rng)});
    MatrixXd b = MatrixXd::Zero(4 * h, 1);
    b.block(h, 0, h, 1).setOnes();  // forget gate starts open
    p.dense.push_back({"lstm.b", b});
  }
  int in = p.input_dim();
  std::vector<int> widths = config.hidden_layers;
  widths.push_back(config.classes);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    p.dense.push_back({"mlp.W" + std::to_string(l), glorot(widths[l], in, rng)});
    p.dense.push_back({"mlp.b" + std::to_string(l), MatrixXd::Zero(widths[l], 1)});
    in = widths[l];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward and backward passes

namespace {

struct Cache {
  VectorXd char_sum, char_rep;
  double char_norm = 0.0;
  bool char_active = false;

  std::vector<VectorXd> x;  // word vectors
  VectorXd mean, enc;       // pooled
  std::vector<VectorXd> gi, gf, gg, go, cs, hs;  // recurrent; hs[0], cs[0] are zero

  VectorXd input;
  std::vector<VectorXd> pre, post, mask;
  VectorXd logits, probs;
};

std::size_t dense_index(const ModelParams& p, std::string_view name) {
  for (std::size_t i = 0; i < p.dense.size(); ++i)
    if (p.dense[i].name == name) return i;
  throw std::logic_error("no parameter named " + std::string(name));
}

void check_dims(const ModelParams& p, const FeatureVector& fv) {
  if (static_cast<int>(fv.pos_counts.size()) != p.pos_dim ||
      static_cast<int>(fv.section_onehot.size()) != p.section_dim || fv.subword_ids.size() != fv.token_ids.size())
    throw UserError("feature vector does not match the model dimensions (vocabulary/model skew): pos " +
                    std::to_string(fv.pos_counts.size()) + " vs " + std::to_string(p.pos_dim) + ", sections " +
                    std::to_string(fv.section_onehot.size()) + " vs " + std::to_string(p.section_dim));
}

void char_forward(const ModelParams& p, const std::vector<int>& ids, Cache& c) {
  c.char_sum = VectorXd::Zero(p.config.char_embed_dim);
  for (int id : ids) c.char_sum += p.chars.row(id);
  c.char_norm = c.char_sum.lpNorm<1>();
  c.char_active = !ids.empty() && c.char_norm > 0.0;
  c.char_rep = c.char_active ? VectorXd(c.char_sum / c.char_norm) : VectorXd::Zero(p.config.char_embed_dim);
}

void char_backward(const Cache& c, const VectorXd& d_rep, const std::vector<int>& ids,
                   std::map<int, VectorXd>& grads) {
  if (!c.char_active) return;
  const double dot = d_rep.dot(c.char_rep);
  VectorXd d_sum(d_rep.size());
  for (int i = 0; i < d_rep.size(); ++i) {
    const double s = c.char_sum(i);
    const double sign = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
    d_sum(i) = (d_rep(i) - sign * dot) / c.char_norm;
  }
  for (int id : ids) add_row(grads, id, d_sum);
}

VectorXd word_vector(const ModelParams& p, int token_id, const std::vector<int>& subwords) {
  VectorXd v = p.tokens.row(token_id);
  if (!subwords.empty()) {
    VectorXd s = VectorXd::Zero(v.size());
    for (int sw : subwords) s += p.subwords.row(sw);
    v += s / static_cast<double>(subwords.size());
  }
  return v;
}

void statement_forward(const ModelParams& p, const FeatureVector& fv, Cache& c) {
  const int h = p.config.statement_encoder_dim;
  c.x.clear();
  for (std::size_t t = 0; t < fv.token_ids.size(); ++t) c.x.push_back(word_vector(p, fv.token_ids[t], fv.subword_ids[t]));
  if (p.config.encoder == EncoderKind::kPooled) {
    c.mean = VectorXd::Zero(p.config.token_embed_dim);
    for (const auto& v : c.x) c.mean += v;
    if (!c.x.empty()) c.mean /= static_cast<double>(c.x.size());
    c.enc = (p.get("enc.W") * c.mean + p.get("enc.b").col(0)).array().tanh().matrix();
    return;
  }
  const MatrixXd& wx = p.get("lstm.Wx");
  const MatrixXd& wh = p.get("lstm.Wh");
  const VectorXd b = p.get("lstm.b").col(0);
  c.gi.clear(), c.gf.clear(), c.gg.clear(), c.go.clear();
  c.hs.assign(1, VectorXd::Zero(h));
  c.cs.assign(1, VectorXd::Zero(h));
  for (const auto& xt : c.x) {
    const VectorXd a = wx * xt + wh * c.hs.back() + b;
    VectorXd i = a.segment(0, h).unaryExpr([](double v) { return sigmoid(v); });
    VectorXd f = a.segment(h, h).unaryExpr([](double v) { return sigmoid(v); });
    VectorXd g = a.segment(2 * h, h).array().tanh().matrix();
    VectorXd o = a.segment(3 * h, h).unaryExpr([](double v) { return sigmoid(v); });
    VectorXd ct = f.cwiseProduct(c.cs.back()) + i.cwiseProduct(g);
    VectorXd ht = o.cwiseProduct(ct.array().tanh().matrix());
    c.gi.push_back(std::move(i));
    c.gf.push_back(std::move(f));
    c.gg.push_back(std::move(g));
    c.go.push_back(std::move(o));
    c.cs.push_back(std::move(ct));
    c.hs.push_back(std::move(ht));
  }
  c.enc = c.hs.back();
}

void statement_backward(const ModelParams& p, const FeatureVector& fv, const Cache& c, const VectorXd& d_enc,
                        Gradients& g) {
  const int h = p.config.statement_encoder_dim;
  std::vector<VectorXd> dx(c.x.size());
  if (p.config.encoder == EncoderKind::kPooled) {
    const VectorXd d_pre = d_enc.cwiseProduct((1.0 - c.enc.array().square()).matrix());
    g.dense[dense_index(p, "enc.W")] += d_pre * c.mean.transpose();
    g.dense[dense_index(p, "enc.b")] += d_pre;
    if (c.x.empty()) return;
    const VectorXd d_mean = p.get("enc.W").transpose() * d_pre / static_cast<double>(c.x.size());
    for (auto& v : dx) v = d_mean;
  } else {
    const MatrixXd& wx = p.get("lstm.Wx");
    const MatrixXd& wh = p.get("lstm.Wh");
    MatrixXd& gwx = g.dense[dense_index(p, "lstm.Wx")];
    MatrixXd& gwh = g.dense[dense_index(p, "lstm.Wh")];
    MatrixXd& gb = g.dense[dense_index(p, "lstm.b")];
    VectorXd dh = d_enc;
    VectorXd dc_next = VectorXd::Zero(h);
    VectorXd da(4 * h);
    for (std::size_t t = c.x.size(); t-- > 0;) {
      const VectorXd& i = c.gi[t];
      const VectorXd& f = c.gf[t];
      const VectorXd& gg = c.gg[t];
      const VectorXd& o = c.go[t];
      const VectorXd tc = c.cs[t + 1].array().tanh().matrix();
      const VectorXd d_o = dh.cwiseProduct(tc);
      const VectorXd dc = dc_next + dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
      da.segment(0, h) = dc.cwiseProduct(gg).cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
      da.segment(h, h) = dc.cwiseProduct(c.cs[t]).cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
      da.segment(2 * h, h) = dc.cwiseProduct(i).cwiseProduct((1.0 - gg.array().square()).matrix());
      da.segment(3 * h, h) = d_o.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());
      dc_next = dc.cwiseProduct(f);
      gwx.noalias() += da * c.x[t].transpose();
      gwh.noalias() += da * c.hs[t].transpose();
      gb += da;
      dx[t] = wx.transpose() * da;
      dh = wh.transpose() * da;
    }
  }
  for (std::size_t t = 0; t < dx.size(); ++t) {
    add_row(g.tokens, fv.token_ids[t], dx[t]);
    const auto& sw = fv.subword_ids[t];
    if (sw.empty()) continue;
    const VectorXd share = dx[t] / static_cast<double>(sw.size());
    for (int id : sw) add_row(g.subwords, id, share);
  }
}

void forward_pass(const ModelParams& p, const FeatureVector& fv, Cache& c, std::mt19937_64* rng) {
  check_dims(p, fv);
  char_forward(p, fv.char_ids, c);
  statement_forward(p, fv, c);
  const int dc = p.config.char_embed_dim, h = p.config.statement_encoder_dim;
  c.input.resize(p.input_dim());
  c.input.segment(0, dc) = c.char_rep;
  c.input.segment(dc, h) = c.enc;
  int off = dc + h;
  for (int v : fv.pos_counts) c.input(off++) = v;
  for (auto v : fv.section_onehot) c.input(off++) = v;
  c.input(off++) = fv.order_scalar;
  c.input(off++) = fv.totwords_scalar;

  const std::size_t layers = p.config.hidden_layers.size();
  const std::size_t w0 = dense_index(p, "mlp.W0");
  c.pre.resize(layers);
  c.post.resize(layers);
  c.mask.assign(layers, VectorXd());
  const double keep = 1.0 - p.config.dropout;
  const VectorXd* in = &c.input;
  for (std::size_t l = 0; l < layers; ++l) {
    c.pre[l] = p.dense[w0 + 2 * l].value * *in + p.dense[w0 + 2 * l + 1].value.col(0);
    c.post[l] = p.config.activation == Activation::kRelu ? VectorXd(c.pre[l].cwiseMax(0.0))
                                                         : VectorXd(c.pre[l].array().tanh().matrix());
    if (rng && p.config.dropout > 0.0) {
      c.mask[l].resize(c.post[l].size());
      for (int k = 0; k < c.mask[l].size(); ++k) c.mask[l](k) = unit_rand(*rng) < keep ? 1.0 / keep : 0.0;
      c.post[l] = c.post[l].cwiseProduct(c.mask[l]);
    }
    in = &c.post[l];
  }
  c.logits = p.dense[w0 + 2 * layers].value * *in + p.dense[w0 + 2 * layers + 1].value.col(0);
  const double mx = c.logits.maxCoeff();
  c.probs = (c.logits.array() - mx).exp().matrix();
  c.probs /= c.probs.sum();
}

double example_loss(const ModelParams& p, const Cache& c, int y, VectorXd* d_logits) {
  const int k = static_cast<int>(c.probs.size());
  if (p.config.loss == LossKind::kCategorical) {
    const double loss = -std::log(std::max(c.probs(y), 1e-300));
    if (d_logits) {
      *d_logits = c.probs;
      (*d_logits)(y) -= 1.0;
    }
    return loss;
  }
  constexpr double kClip = 1e-7;
  double loss = 0.0;
  VectorXd dp(k);
  for (int j = 0; j < k; ++j) {
    const double pj = std::clamp(c.probs(j), kClip, 1.0 - kClip);
    const double t = j == y ? 1.0 : 0.0;
    loss -= t * std::log(pj) + (1.0 - t) * std::log(1.0 - pj);
    const bool clipped = c.probs(j) != pj;
    dp(j) = clipped ? 0.0 : (-(t / pj) + (1.0 - t) / (1.0 - pj)) / k;
  }
  if (d_logits) {
    const double s = c.probs.dot(dp);
    *d_logits = c.probs.cwiseProduct((dp.array() - s).matrix());
  }
  return loss / k;
}

void backward_pass(const ModelParams& p, const FeatureVector& fv, const Cache& c, const VectorXd& d_logits,
                   Gradients& g) {
  const std::size_t layers = p.config.hidden_layers.size();
  const std::size_t w0 = dense_index(p, "mlp.W0");
  const VectorXd& last = layers ? c.post[layers - 1] : c.input;
  g.dense[w0 + 2 * layers].noalias() += d_logits * last.transpose();
  g.dense[w0 + 2 * layers + 1] += d_logits;
  VectorXd dh = p.dense[w0 + 2 * layers].value.transpose() * d_logits;
  for (std::size_t l = layers; l-- > 0;) {
    if (c.mask[l].size()) dh = dh.cwiseProduct(c.mask[l]);
    VectorXd da(dh.size());
    if (p.config.activation == Activation::kRelu) {
      for (int k = 0; k < da.size(); ++k) da(k) = c.pre[l](k) > 0.0 ? dh(k) : 0.0;
    } else {
      const VectorXd t = c.pre[l].array().tanh().matrix();
      da = dh.cwiseProduct((1.0 - t.array().square()).matrix());
    }
    const VectorXd& in = l ? c.post[l - 1] : c.input;
    g.dense[w0 + 2 * l].noalias() += da * in.transpose();
    g.dense[w0 + 2 * l + 1] += da;
    dh = p.dense[w0 + 2 * l].value.transpose() * da;
  }
  const int dc = p.config.char_embed_dim, h = p.config.statement_encoder_dim;
  if (!p.config.freeze_chars) char_backward(c, dh.segment(0, dc), fv.char_ids, g.chars);
  statement_backward(p, fv, c, dh.segment(dc, h), g);
}

Gradients zero_grads(const ModelParams& p) {
  Gradients g;
  for (const auto& d : p.dense) g.dense.push_back(MatrixXd::Zero(d.value.rows(), d.value.cols()));
  return g;
}

}  // namespace

VectorXd char_representation(const ModelParams& p, const std::vector<int>& char_ids) {
  Cache c;
  char_forward(p, char_ids, c);
  return c.char_rep;
}

std::vector<double> logits(const ModelParams& p, const FeatureVector& fv) {
  Cache c;
  forward_pass(p, fv, c, nullptr);
  return {c.logits.data(), c.logits.data() + c.logits.size()};
}

std::array<double, 3> softmax3(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::array<double, 3> out{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) sum += out[i] = std::exp(z[i] - mx);
  for (auto& v : out) v /= sum;
  return out;
}

Prediction forward(const ModelParams& p, const FeatureVector& fv) {
  Cache c;
  forward_pass(p, fv, c, nullptr);
  Prediction pr;
  int best = 0;
  for (int k = 0; k < 3; ++k) {
    pr.probs[static_cast<std::size_t>(k)] = c.probs(k);
    if (c.probs(k) > c.probs(best)) best = k;
  }
  pr.label = static_cast<ClassLabel>(best);
  pr.max_prob = c.probs(best);
  return pr;
}

double loss_and_grad(const ModelParams& p, const std::vector<const Example*>& batch, Gradients* grads,
                     std::mt19937_64* rng) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad needs a non-empty batch");
  if (grads) *grads = zero_grads(p);
  double total = 0.0;
  Cache c;
  VectorXd d_logits;
  for (const Example* ex : batch) {
    forward_pass(p, ex->fv, c, rng);
    const int y = static_cast<int>(ex->label);
    total += example_loss(p, c, y, grads ? &d_logits : nullptr);
    if (grads) backward_pass(p, ex->fv, c, d_logits, *grads);
  }
  const double n = static_cast<double>(batch.size());
  const double loss = total / n;
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss over a batch of " << batch.size() << " (first example: " << batch.front()->fv.char_ids.size()
        << " chars, " << batch.front()->fv.token_ids.size() << " tokens, label " << to_string(batch.front()->label) << ")";
    throw NumericalError(msg.str());
  }
  if (grads) {
    for (auto& d : grads->dense) d /= n;
    for (auto* table : {&grads->chars, &grads->tokens, &grads->subwords})
      for (auto& [id, v] : *table) v /= n;
  }
  return loss;
}

double loss_and_grad(const ModelParams& p, const std::vector<Example>& batch, Gradients* grads,
                     std::mt19937_64* rng) {
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return loss_and_grad(p, ptrs, grads, rng);
}

// ---------------------------------------------------------------------------
// Training

Split stratified_split(const std::vector<ClassLabel>& labels, double test_fraction, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  const auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(labels.size()) * test_fraction));
  std::array<std::size_t, kNumClasses> take{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double exact = static_cast<double>(by_class[k].size()) * test_fraction;
    take[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - std::floor(exact);
    assigned += take[k];
  }
  std::array<std::size_t, kNumClasses> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < total_test && r < kNumClasses; ++r) {
    const auto k = order[r];
    if (take[k] < by_class[k].size()) ++take[k], ++assigned;
  }
  std::mt19937_64 rng(seed);
  Split s;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    stable_shuffle(by_class[k], rng);
    s.test.insert(s.test.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(take[k]));
    s.train.insert(s.train.end(), by_class[k].begin() + static_cast<std::ptrdiff_t>(take[k]), by_class[k].end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

nlohmann::ordered_json Evaluation::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["accuracy"] = accuracy;
  auto rows = nlohmann::ordered_json::object();
  for (auto t : kAllClasses) {
    auto row = nlohmann::ordered_json::object();
    for (auto q : kAllClasses)
      row[std::string(to_string(q))] = confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(q)];
    rows[std::string(to_string(t))] = row;
  }
  j["confusion"] = rows;
  auto rec = nlohmann::ordered_json::object();
  for (auto t : kAllClasses) rec[std::string(to_string(t))] = recall[static_cast<std::size_t>(t)];
  j["recall"] = rec;
  return j;
}

Evaluation evaluate_predictions(const std::vector<ClassLabel>& truth, const std::vector<ClassLabel>& predicted) {
  Evaluation e;
  e.total = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++e.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    correct += truth[i] == predicted[i];
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto row = std::accumulate(e.confusion[k].begin(), e.confusion[k].end(), std::size_t{0});
    e.recall[k] = row ? static_cast<double>(e.confusion[k][k]) / static_cast<double>(row) : 0.0;
  }
  e.accuracy = e.total ? static_cast<double>(correct) / static_cast<double>(e.total) : 0.0;
  return e;
}

Evaluation evaluate(const ModelParams& p, const std::vector<Example>& test) {
  std::vector<ClassLabel> truth, pred;
  for (const auto& ex : test) {
    truth.push_back(ex.label);
    pred.push_back(forward(p, ex.fv).label);
  }
  return evaluate_predictions(truth, pred);
}

namespace {

struct RowMoments {
  std::map<int, VectorXd> m, v;
};

class Adam {
public:
  Adam(const ModelParams& p, const TrainConfig& tc) : tc_(tc) {
    for (const auto& d : p.dense) {
      m_.push_back(MatrixXd::Zero(d.value.rows(), d.value.cols()));
      v_.push_back(MatrixXd::Zero(d.value.rows(), d.value.cols()));
    }
  }

  void step(ModelParams& p, const Gradients& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < p.dense.size(); ++i) {
      m_[i] = tc_.beta1 * m_[i] + (1.0 - tc_.beta1) * g.dense[i];
      v_[i] = tc_.beta2 * v_[i] + (1.0 - tc_.beta2) * g.dense[i].cwiseProduct(g.dense[i]);
      p.dense[i].value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + tc_.epsilon);
    }
    if (!p.config.freeze_chars) rows(p.chars, g.chars, chars_, lr, c1, c2);
    rows(p.tokens, g.tokens, tokens_, lr, c1, c2);
    rows(p.subwords, g.subwords, subwords_, lr, c1, c2);
  }

private:
  // Lazy variant: only rows present in this batch's gradient move.
  void rows(EmbeddingTable& table, const std::map<int, VectorXd>& grads, RowMoments& mom, double lr, double c1,
            double c2) {
    for (const auto& [id, g] : grads) {
      auto& m = mom.m.try_emplace(id, VectorXd::Zero(g.size())).first->second;
      auto& v = mom.v.try_emplace(id, VectorXd::Zero(g.size())).first->second;
      m = tc_.beta1 * m + (1.0 - tc_.beta1) * g;
      v = tc_.beta2 * v + (1.0 - tc_.beta2) * g.cwiseProduct(g);
      table.mutable_row(id).array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + tc_.epsilon);
    }
  }

  TrainConfig tc_;
  long t_ = 0;
  std::vector<MatrixXd> m_, v_;
  RowMoments chars_, tokens_, subwords_;
};

bool all_finite(const ModelParams& p) {
  for (const auto& d : p.dense)
    if (!d.value.allFinite()) return false;
  for (const auto* t : {&p.chars, &p.tokens, &p.subwords})
    for (const auto& [id, v] : t->stored())
      if (!v.allFinite()) return false;
  return true;
}

}  // namespace

TrainResult train(const std::vector<Example>& data, const ModelConfig& mc, const TrainConfig& tc,
                  const Vocabulary& vocab, std::optional<ModelParams> initial,
                  const std::function<void(const ModelParams&, const EpochMetrics&)>& on_epoch) {
  mc.validate();
  tc.validate();
  std::array<std::size_t, kNumClasses> per_class{};
  for (const auto& ex : data) ++per_class[static_cast<std::size_t>(ex.label)];
  for (auto label : kAllClasses)
    if (per_class[static_cast<std::size_t>(label)] < 10)
      throw UserError("training needs at least 10 examples per class; " + std::string(to_string(label)) + " has " +
                      std::to_string(per_class[static_cast<std::size_t>(label)]));

  std::vector<ClassLabel> labels;
  for (const auto& ex : data) labels.push_back(ex.label);
  TrainResult result;
  result.split = stratified_split(labels, tc.test_fraction, tc.seed);
  result.params = initial ? std::move(*initial) : init_model(mc, vocab, tc.seed);
  result.params.config.freeze_chars = mc.freeze_chars;
  ModelParams& p = result.params;

  std::vector<Example> test;
  for (auto i : result.split.test) test.push_back(data[i]);

  Adam adam(p, tc);
  std::mt19937_64 rng(splitmix64(tc.seed ^ 0x7A11));
  double lr = tc.initial_lr;
  double best_acc = -1.0;
  int stale = 0;
  std::vector<std::size_t> order = result.split.train;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    stable_shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + tc.batch_size); ++k) batch.push_back(&data[order[k]]);
      Gradients g;
      double loss;
      try {
        loss = loss_and_grad(p, batch, &g, &rng);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + "; training aborted, "
                             "the last completed epoch's checkpoint is the last good state");
      }
      adam.step(p, g, lr);
      loss_sum += loss;
      ++batches;
    }
    if (!all_finite(p))
      throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch) +
                           "; the last completed epoch's checkpoint is the last good state");
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    m.test_accuracy = evaluate(p, test).accuracy;
    m.learning_rate = lr;
    log::get().info("event=epoch epoch={} train_loss={:.6f} test_accuracy={:.6f} lr={:g}", epoch, m.train_loss,
                    m.test_accuracy, lr);
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(p, m);
    if (m.test_accuracy > best_acc) {
      best_acc = m.test_accuracy;
      stale = 0;
    } else if (++stale >= tc.patience) {
      lr = std::max(tc.min_lr, lr * tc.lr_factor);
      stale = 0;
    }
  }
  result.final_eval = evaluate(p, test);
  return result;
}

EmbeddingTable pretrain_char_embeddings(const std::vector<Example>& data, const ModelConfig& mc,
                                        const TrainConfig& tc, const Vocabulary& vocab) {
  mc.validate();
  tc.validate();
  if (data.empty()) throw UserError("char pretraining needs labeled citations");
  ModelParams p = init_model(mc, vocab, tc.seed);
  std::mt19937_64 rng(splitmix64(tc.seed ^ 0x9C4A));
  MatrixXd w = glorot(2, mc.char_embed_dim, rng);
  VectorXd b = VectorXd::Zero(2);
  MatrixXd mw = MatrixXd::Zero(2, mc.char_embed_dim), vw = mw;
  VectorXd mb = VectorXd::Zero(2), vb = mb;
  RowMoments mom;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long t = 0;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    stable_shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      MatrixXd gw = MatrixXd::Zero(2, mc.char_embed_dim);
      VectorXd gb = VectorXd::Zero(2);
      std::map<int, VectorXd> gchars;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data[order[k]];
        const int y = ex.label == ClassLabel::kWeb ? 1 : 0;
        Cache c;
        char_forward(p, ex.fv.char_ids, c);
        VectorXd z = w * c.char_rep + b;
        VectorXd pr = (z.array() - z.maxCoeff()).exp().matrix();
        pr /= pr.sum();
        loss_sum -= std::log(std::max(pr(y), 1e-300));
        VectorXd dz = pr;
        dz(y) -= 1.0;
        gw += dz * c.char_rep.transpose();
        gb += dz;
        char_backward(c, w.transpose() * dz, ex.fv.char_ids, gchars);
      }
      const double n = static_cast<double>(end - start);
      ++t;
      const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(t));
      auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = tc.beta1 * m + (1.0 - tc.beta1) * g;
        v = tc.beta2 * v + (1.0 - tc.beta2) * g.cwiseProduct(g);
        param.array() -= tc.initial_lr * (m.array() / c1) / ((v.array() / c2).sqrt() + tc.epsilon);
      };
      gw /= n;
      gb /= n;
      adam(w, mw, vw, gw);
      adam(b, mb, vb, gb);
      for (auto& [id, g] : gchars) {
        g /= n;
        auto& m = mom.m.try_emplace(id, VectorXd::Zero(g.size())).first->second;
        auto& v = mom.v.try_emplace(id, VectorXd::Zero(g.size())).first->second;
        adam(p.chars.mutable_row(id), m, v, g);
      }
    }
    log::get().info("event=pretrain_epoch epoch={} loss={:.6f}", epoch, loss_sum / static_cast<double>(data.size()));
  }
  return p.chars;
}

std::vector<Prediction> predict_batch(const ModelParams& p, const std::vector<FeatureVector>& fvs) {
  std::vector<Prediction> out;
  out.reserve(fvs.size());
  for (const auto& fv : fvs) out.push_back(forward(p, fv));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, little-endian u64 header length, JSON header, raw doubles.

namespace {

nlohmann::ordered_json config_json(const ModelConfig& c) {
  return {{"char_embed_dim", c.char_embed_dim},
          {"token_embed_dim", c.token_embed_dim},
          {"statement_encoder_dim", c.statement_encoder_dim},
          {"hidden_layers", c.hidden_layers},
          {"classes", c.classes},
          {"dropout", c.dropout},
          {"encoder", to_string(c.encoder)},
          {"activation", to_string(c.activation)},
          {"loss", to_string(c.loss)},
          {"freeze_chars", c.freeze_chars}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.char_embed_dim = j.at("char_embed_dim").get<int>();
  c.token_embed_dim = j.at("token_embed_dim").get<int>();
  c.statement_encoder_dim = j.at("statement_encoder_dim").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
  c.classes = j.at("classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>()).value();
  c.activation = parse_activation(j.at("activation").get<std::string>()).value();
  c.loss = parse_loss_kind(j.at("loss").get<std::string>()).value();
  c.freeze_chars = j.at("freeze_chars").get<bool>();
  return c;
}

void append_doubles(std::string& out, const double* data, std::size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

}  // namespace

void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  nlohmann::ordered_json h;
  h["format"] = "wikicite-model";
  h["version"] = 1;
  h["byte_order"] = "little";
  h["config"] = config_json(p.config);
  h["vocab_hash"] = p.vocab_hash;
  h["pos_dim"] = p.pos_dim;
  h["section_dim"] = p.section_dim;
  auto tables = nlohmann::ordered_json::object();
  for (const auto& [name, t] : {std::pair<const char*, const EmbeddingTable*>{"chars", &p.chars},
                                {"tokens", &p.tokens},
                                {"subwords", &p.subwords}}) {
    std::vector<int> ids;
    for (const auto& [id, v] : t->stored()) ids.push_back(id);
    tables[name] = {{"dim", t->dim()}, {"seed", t->seed()}, {"scale", t->scale()}, {"ids", ids}};
  }
  h["tables"] = tables;
  auto dense = nlohmann::ordered_json::array();
  for (const auto& d : p.dense) dense.push_back({{"name", d.name}, {"rows", d.value.rows()}, {"cols", d.value.cols()}});
  h["dense"] = dense;

  const std::string header = h.dump();
  std::string out(kMagic, sizeof(kMagic));
  const std::uint64_t len = header.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += header;
  for (const auto* t : {&p.chars, &p.tokens, &p.subwords})
    for (const auto& [id, v] : t->stored()) append_doubles(out, v.data(), static_cast<std::size_t>(v.size()));
  for (const auto& d : p.dense) append_doubles(out, d.value.data(), static_cast<std::size_t>(d.value.size()));
  write_file_atomic(path, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UserError("model checkpoint not found: " + path.string());
  const std::string data = read_file(path);
  auto fail = [&](const std::string& why) { return UserError("corrupt model checkpoint " + path.string() + ": " + why); };
  if (data.size() < sizeof(kMagic) + 8 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) throw fail("bad magic");
  std::uint64_t len;
  std::memcpy(&len, data.data() + sizeof(kMagic), sizeof(len));
  std::size_t pos = sizeof(kMagic) + sizeof(len);
  if (len > data.size() - pos) throw fail("header length out of range");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(data.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  pos += len;
  if (h.value("format", "") != "wikicite-model" || h.value("version", 0) != 1) throw fail("unsupported format");

  ModelParams p;
  p.config = config_from_json(h.at("config"));
  p.vocab_hash = h.at("vocab_hash").get<std::string>();
  p.pos_dim = h.at("pos_dim").get<int>();
  p.section_dim = h.at("section_dim").get<int>();
  auto read_doubles = [&](double* dst, std::size_t n) {
    if (n * sizeof(double) > data.size() - pos) throw fail("truncated tensor data");
    std::memcpy(dst, data.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  };
  for (const auto& [name, t] : {std::pair<const char*, EmbeddingTable*>{"chars", &p.chars},
                                {"tokens", &p.tokens},
                                {"subwords", &p.subwords}}) {
    const auto& tj = h.at("tables").at(name);
    *t = EmbeddingTable(tj.at("dim").get<int>(), tj.at("seed").get<std::uint64_t>(), tj.at("scale").get<double>());
    for (int id : tj.at("ids").get<std::vector<int>>()) {
      VectorXd v(t->dim());
      read_doubles(v.data(), static_cast<std::size_t>(v.size()));
      t->set_row(id, std::move(v));
    }
  }
  for (const auto& d : h.at("dense")) {
    MatrixXd m(d.at("rows").get<Eigen::Index>(), d.at("cols").get<Eigen::Index>());
    read_doubles(m.data(), static_cast<std::size_t>(m.size()));
    p.dense.push_back({d.at("name").get<std::string>(), std::move(m)});
  }
  if (pos != data.size()) throw fail("trailing bytes after tensor data");
  return p;
}

std::size_t import_word_vectors(ModelParams& p, const Vocabulary& vocab, const std::filesystem::path& path) {
  std::size_t installed = 0;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto fields = text::split_words(line);
    if (fields.empty()) return;
    if (line_no == 1 && fields.size() == 2) return;  // "count dim" header
    if (static_cast<int>(fields.size()) != p.config.token_embed_dim + 1)
      throw UserError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(p.config.token_embed_dim) + " components");
    auto it = vocab.token_ids.find(statement_token(fields[0]));
    if (it == vocab.token_ids.end()) return;
    VectorXd v(p.config.token_embed_dim);
    for (int i = 0; i < v.size(); ++i) v(i) = std::stod(fields[static_cast<std::size_t>(i) + 1]);
    p.tokens.set_row(it->second, std::move(v));
    ++installed;
  });
  return installed;
}

}  // namespace wikicite
