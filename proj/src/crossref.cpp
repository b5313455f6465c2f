#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "wikicite/crossref.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "wikicite/log.hpp"
#include "wikicite/common.hpp"

namespace wikicite {

std::optional<LookupQuery> build_query(const CitationRecord& r) {
  LookupQuery q;
  q.title = text::collapse_whitespace(r.citation.title);
  if (q.title.empty()) return std::nullopt;
  if (!r.citation.authors.empty()) q.first_author = text::collapse_whitespace(r.citation.authors.front().display());
  q.key = std::to_string(r.page_id) + ":" + std::to_string(r.order_index);
  return q;
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

std::string request_target(const LookupQuery& q, std::size_t rows) {
  std::string t = "/works?query.bibliographic=" + percent_encode(q.title);
  if (!q.first_author.empty()) t += "&query.author=" + percent_encode(q.first_author);
  t += "&rows=" + std::to_string(rows);
  return t;
}

std::string query_hash(const std::string& request) { return sha256_hex(request); }

std::vector<std::string> LookupConfig::violations() const {
  std::vector<std::string> v;
  if (max_rps < 1 || max_rps > 50) v.push_back("max_rps must be in [1, 50]");
  if (retained_results < 1) v.push_back("retained_results must be >= 1");
  if (!(score_threshold >= 0.0)) v.push_back("score_threshold must be >= 0");
  if (max_attempts < 1) v.push_back("max_attempts must be >= 1");
  if (!(backoff_initial_s >= 0.0)) v.push_back("backoff_initial_s must be >= 0");
  if (workers < 1) v.push_back("workers must be >= 1");
  return v;
}

// ---------------------------------------------------------------------------

double SystemClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until(double t) {
  const double dt = t - now();
  if (dt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
}

double SimulatedClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void SimulatedClock::sleep_until(double t) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, t);
}

void SimulatedClock::advance(double dt) {
  std::lock_guard lock(mu_);
  now_ += dt;
}

RateLimiter::RateLimiter(int max_requests, double window_s, Clock& clock)
    : max_(max_requests), window_(window_s), clock_(clock) {
  if (max_ < 1 || !(window_ > 0)) throw std::invalid_argument("rate limiter needs max >= 1 and window > 0");
}

double RateLimiter::acquire() {
  std::lock_guard lock(mu_);
  // Slot ages are compared as `t - ts >= window`. The subtraction is exact for nearby
  // times, while `ts + window` may round below the true release time and let a burst
  // in early.
  auto release = [this](double ts) {
    double r = ts + window_;
    while (r - ts < window_) r = std::nextafter(r, std::numeric_limits<double>::infinity());
    return r;
  };
  for (;;) {
    const double t = clock_.now();
    while (!issued_.empty() && t - issued_.front() >= window_) issued_.pop_front();
    if (static_cast<int>(issued_.size()) < max_) {
      issued_.push_back(t);
      return t;
    }
    clock_.sleep_until(release(issued_.front()));
  }
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(const LookupConfig& cfg) : cfg_(cfg) {}

HttpResponse HttpTransport::get(const std::string& target) {
  httplib::Client cli(cfg_.endpoint);
  const auto secs = static_cast<time_t>(std::ceil(cfg_.timeout_s));
  cli.set_connection_timeout(secs);
  cli.set_read_timeout(secs);
  std::string agent = "wikicite/1.0";
  if (!cfg_.mailto.empty()) agent += " (mailto:" + cfg_.mailto + ")";
  httplib::Headers headers = {{"User-Agent", agent}};
  if (!cfg_.mailto.empty()) headers.emplace("Mailto", cfg_.mailto);
  auto res = cli.Get(target, headers);
  HttpResponse out;
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

ReplayTransport ReplayTransport::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UserError("replay file not found: " + path.string());
  ReplayTransport t;
  for_each_line(path, [&](std::string_view line, std::size_t no) {
    if (text::trim(line).empty()) return;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw UserError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
    const auto request = j.at("request").get<std::string>();
    if (j.at("query_hash").get<std::string>() != query_hash(request))
      throw UserError(path.string() + ":" + std::to_string(no) + ": query_hash does not match request");
    t.add(request, j.at("status").get<int>(), j.at("response_body").get<std::string>());
  });
  return t;
}

void ReplayTransport::add(const std::string& request, int status, std::string body) {
  records_[query_hash(request)] = HttpResponse{status, std::move(body), {}};
}

HttpResponse ReplayTransport::get(const std::string& target) {
  auto it = records_.find(query_hash(target));
  if (it == records_.end()) throw UserError("replay file has no recorded response for " + target);
  return it->second;
}

// ---------------------------------------------------------------------------

std::string_view to_string(FetchOutcome o) {
  switch (o) {
    case FetchOutcome::kOk: return "OK";
    case FetchOutcome::kInvalidRequest: return "INVALID_REQUEST";
    case FetchOutcome::kUnparseable: return "UNPARSEABLE";
    case FetchOutcome::kTransientFailure: return "TRANSIENT_FAILURE";
  }
  return "?";
}

std::vector<CrossrefCandidate> parse_candidates(const std::string& body, std::size_t keep) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("message") || !j["message"].is_object() || !j["message"].contains("items"))
    throw std::runtime_error("response has no message.items");
  const auto& items = j["message"]["items"];
  if (!items.is_array()) throw std::runtime_error("message.items is not an array");
  std::vector<CrossrefCandidate> out;
  for (std::size_t i = 0; i < items.size() && i < keep; ++i) {
    const auto& it = items[i];
    if (!it.is_object() || !it.contains("score") || !it["score"].is_number())
      throw std::runtime_error("item " + std::to_string(i) + " has no numeric score");
    auto doi = normalize_identifier(IdKind::kDoi, it.contains("DOI") && it["DOI"].is_string() ? it["DOI"].get<std::string>() : "");
    if (!doi) continue;
    CrossrefCandidate c;
    c.doi = *doi.value;
    c.score = it.at("score").get<double>();
    c.rank = static_cast<int>(i) + 1;
    if (it.contains("title") && it["title"].is_array() && !it["title"].empty() && it["title"][0].is_string()) c.title = it["title"][0].get<std::string>();
    if (it.contains("container-title") && it["container-title"].is_array() && !it["container-title"].empty() &&
        it["container-title"][0].is_string())
      c.container_title = it["container-title"][0].get<std::string>();
    if (it.contains("issued") && it["issued"].is_object()) {
      const auto& dp = it["issued"].value("date-parts", nlohmann::json::array());
      if (dp.is_array() && !dp.empty() && dp[0].is_array() && !dp[0].empty() && dp[0][0].is_number_integer())
        c.year = dp[0][0].get<int>();
    }
    if (!std::isfinite(c.score)) throw std::runtime_error("non-finite score");
    out.push_back(std::move(c));
  }
  return out;
}

CrossrefClient::CrossrefClient(LookupConfig cfg, Transport& transport, Clock& clock)
    : cfg_(std::move(cfg)), transport_(transport), clock_(clock), limiter_(cfg_.max_rps, 1.0, clock) {
  if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
}

std::optional<HttpResponse> CrossrefClient::cache_read(const std::string& hash, const std::string& request) const {
  if (cfg_.cache_dir.empty()) return std::nullopt;
  const auto path = cfg_.cache_dir / (hash + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto corrupt = [&](const std::string& why) {
    return CacheCorruption("cache entry " + path.string() + " failed verification (" + why +
                           "); delete it to fetch the query again");
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }
  if (!j.is_object() || j.value("query_hash", "") != hash || j.value("request", "") != request ||
      !j.contains("status") || !j["status"].is_number_integer() || !j.contains("response_body") ||
      !j["response_body"].is_string())
    throw corrupt("fields do not match the query");
  return HttpResponse{j["status"].get<int>(), j["response_body"].get<std::string>(), {}};
}

void CrossrefClient::cache_write(const std::string& hash, const std::string& request, const HttpResponse& r) const {
  if (cfg_.cache_dir.empty()) return;
  nlohmann::ordered_json j;
  j["query_hash"] = hash;
  j["request"] = request;
  j["status"] = r.status;
  j["response_body"] = r.body;
  write_file_atomic(cfg_.cache_dir / (hash + ".json"), j.dump() + "\n");
}

namespace {

bool is_final(int status) { return (status >= 200 && status < 300) || (status >= 400 && status < 500 && status != 429); }

}  // namespace

FetchResult CrossrefClient::fetch(const LookupQuery& q) {
  const std::string request = request_target(q, cfg_.retained_results);
  const std::string hash = query_hash(request);
  FetchResult out;
  HttpResponse resp;
  if (auto cached = cache_read(hash, request)) {
    resp = std::move(*cached);
    out.from_cache = true;
  } else {
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      limiter_.acquire();
      ++network_calls_;
      out.attempts = attempt;
      resp = transport_.get(request);
      if (is_final(resp.status)) break;
      log::get().warn("event=lookup_retry attempt={} status={} error=\"{}\"", attempt, resp.status, resp.error);
      if (attempt < cfg_.max_attempts)
        clock_.sleep_until(clock_.now() + cfg_.backoff_initial_s * std::pow(2.0, attempt - 1));
    }
    if (is_final(resp.status)) cache_write(hash, request, resp);
  }
  out.http_status = resp.status;
  if (resp.status >= 400 && resp.status < 500 && resp.status != 429) {
    out.outcome = FetchOutcome::kInvalidRequest;
  } else if (resp.status >= 200 && resp.status < 300) {
    try {
      out.candidates = parse_candidates(resp.body, cfg_.retained_results);
    } catch (const std::exception& e) {
      out.outcome = FetchOutcome::kUnparseable;
      log::get().warn("event=lookup_unparseable query_hash={} error=\"{}\"", hash, e.what());
    }
  } else {
    out.outcome = FetchOutcome::kTransientFailure;
  }
  return out;
}

std::optional<std::string> select_doi(const std::vector<CrossrefCandidate>& candidates, const LookupConfig& cfg) {
  for (const auto& c : candidates)
    if (c.rank == 1) return c.score >= cfg.score_threshold ? std::optional(c.doi) : std::nullopt;
  return std::nullopt;
}

std::vector<FetchResult> fetch_all(CrossrefClient& client, const std::vector<LookupQuery>& queries,
                                   std::size_t workers) {
  std::map<std::string, std::size_t> first_by_request;
  std::vector<std::size_t> unique, slot(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto [it, inserted] = first_by_request.emplace(request_target(queries[i], 1), unique.size());
    if (inserted) unique.push_back(i);
    slot[i] = it->second;
  }
  std::vector<FetchResult> results(unique.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next++;
      if (k >= unique.size() || failed) return;
      try {
        results[k] = client.fetch(queries[unique[k]]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, unique.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<FetchResult> out;
  out.reserve(queries.size());
  for (auto s : slot) out.push_back(results[s]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const CrossrefCandidate* at_rank(const FetchResult& r, int rank) {
  for (const auto& c : r.candidates)
    if (c.rank == rank) return &c;
  return nullptr;
}

// Exact comparison of P and R. With TP true positives, `pred` predictions and n pairs,
// |P - R| = TP |n - pred| / (pred n) and P + R = TP (n + pred) / (pred n).
struct Ratio {
  __int128 num, den;
  bool operator<(const Ratio& o) const { return num * o.den < o.num * den; }
  bool operator==(const Ratio& o) const { return num * o.den == o.num * den; }
};

Ratio gap(const ThresholdPoint& p, std::size_t n) {
  if (p.predicted == 0 || n == 0) return {0, 1};
  const auto diff = static_cast<__int128>(n > p.predicted ? n - p.predicted : p.predicted - n);
  return {static_cast<__int128>(p.true_positive) * diff, static_cast<__int128>(p.predicted) * n};
}

Ratio sum(const ThresholdPoint& p, std::size_t n) {
  if (p.predicted == 0 || n == 0) return {0, 1};
  return {static_cast<__int128>(p.true_positive) * (n + p.predicted), static_cast<__int128>(p.predicted) * n};
}

}  // namespace

std::vector<GoldPair> load_gold(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UserError("gold file not found: " + path.string());
  std::vector<GoldPair> gold;
  for_each_line(path, [&](std::string_view line, std::size_t no) {
    if (text::trim(line).empty()) return;
    const auto where = path.string() + ":" + std::to_string(no);
    try {
      const auto j = nlohmann::json::parse(line);
      GoldPair g;
      g.query.title = j.at("title").get<std::string>();
      g.query.first_author = j.value("author", "");
      g.query.key = std::to_string(gold.size());
      auto doi = normalize_identifier(IdKind::kDoi, j.at("doi").get<std::string>());
      if (!doi.value) throw UserError(where + ": invalid DOI (" + doi.reason + ")");
      g.doi = *doi.value;
      gold.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw UserError(where + ": " + e.what());
    }
  });
  return gold;
}

ThresholdPoint score_threshold(const std::vector<const FetchResult*>& results, const std::vector<const GoldPair*>& gold,
                               double threshold) {
  ThresholdPoint p;
  p.threshold = threshold;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i]->outcome != FetchOutcome::kOk) continue;
    const auto* c = at_rank(*results[i], 1);
    if (!c || c->score < threshold) continue;
    ++p.predicted;
    if (c->doi == gold[i]->doi) ++p.true_positive;
  }
  p.precision = p.predicted ? static_cast<double>(p.true_positive) / static_cast<double>(p.predicted) : 0.0;
  p.recall = results.empty() ? 0.0 : static_cast<double>(p.true_positive) / static_cast<double>(results.size());
  return p;
}

std::optional<ThresholdPoint> choose_threshold(const std::vector<ThresholdPoint>& grid) {
  // The population size is recovered from recall = TP / n; every point shares it.
  std::optional<ThresholdPoint> best;
  std::size_t n = 0;
  for (const auto& p : grid)
    if (p.true_positive > 0 && p.recall > 0) {
      n = static_cast<std::size_t>(std::llround(static_cast<double>(p.true_positive) / p.recall));
      break;
    }
  for (const auto& p : grid) {
    if (!best) {
      best = p;
      continue;
    }
    const Ratio g = gap(p, n), bg = gap(*best, n);
    if (g < bg) {
      best = p;
    } else if (g == bg) {
      const Ratio s = sum(p, n), bs = sum(*best, n);
      if (bs < s || (s == bs && p.threshold < best->threshold)) best = p;
    }
  }
  return best;
}

HeuristicReport evaluate_heuristics(const std::vector<GoldPair>& gold, const std::vector<FetchResult>& results,
                                    double tuning_fraction, std::uint64_t seed) {
  if (gold.size() != results.size()) throw std::invalid_argument("gold and results differ in length");
  if (gold.size() < 50)
    log::get().warn("event=small_gold_set pairs={} note=\"threshold estimate is unstable below 50 pairs\"", gold.size());
  std::vector<std::size_t> idx(gold.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  stable_shuffle(idx, rng);
  const auto n_tune = static_cast<std::size_t>(std::llround(static_cast<double>(gold.size()) * tuning_fraction));

  HeuristicReport rep;
  std::vector<const FetchResult*> tune_r, held_r;
  std::vector<const GoldPair*> tune_g, held_g;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k < n_tune ? tune_r : held_r).push_back(&results[idx[k]]);
    (k < n_tune ? tune_g : held_g).push_back(&gold[idx[k]]);
  }
  rep.tuning_size = tune_r.size();
  rep.heldout_size = held_r.size();

  for (int rank = 1; rank <= 3; ++rank) {
    HeuristicRow row;
    row.rank = rank;
    for (std::size_t i = 0; i < tune_r.size(); ++i) {
      switch (tune_r[i]->outcome) {
        case FetchOutcome::kInvalidRequest: ++row.invalid_http; continue;
        case FetchOutcome::kUnparseable: ++row.invalid_response; continue;
        case FetchOutcome::kTransientFailure: ++row.transient; continue;
        case FetchOutcome::kOk: break;
      }
      const auto* c = at_rank(*tune_r[i], rank);
      if (c && c->doi == tune_g[i]->doi) ++row.matched;
      else ++row.not_matched;
    }
    rep.rows.push_back(row);
  }

  std::set<double> scores;
  for (const auto* r : tune_r)
    if (r->outcome == FetchOutcome::kOk)
      if (const auto* c = at_rank(*r, 1)) scores.insert(c->score);
  for (double s : scores) rep.grid.push_back(score_threshold(tune_r, tune_g, s));
  rep.chosen = choose_threshold(rep.grid);
  if (rep.chosen) {
    rep.heldout = score_threshold(held_r, held_g, rep.chosen->threshold);
    rep.heldout_false_positive = rep.heldout.predicted - rep.heldout.true_positive;
    rep.heldout_false_negative = held_r.size() - rep.heldout.true_positive;
  }
  return rep;
}

nlohmann::ordered_json HeuristicReport::to_json() const {
  auto point = [](const ThresholdPoint& p) {
    return nlohmann::ordered_json{{"threshold", p.threshold},
                                  {"predicted", p.predicted},
                                  {"true_positive", p.true_positive},
                                  {"precision", p.precision},
                                  {"recall", p.recall}};
  };
  nlohmann::ordered_json j;
  j["tuning_size"] = tuning_size;
  j["heldout_size"] = heldout_size;
  auto rows_j = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"rank", r.rank},
                      {"matched", r.matched},
                      {"not_matched", r.not_matched},
                      {"invalid", r.invalid()},
                      {"invalid_http", r.invalid_http},
                      {"invalid_response", r.invalid_response},
                      {"transient", r.transient}});
  j["heuristics"] = rows_j;
  auto grid_j = nlohmann::ordered_json::array();
  for (const auto& p : grid) grid_j.push_back(point(p));
  j["grid"] = grid_j;
  j["chosen"] = chosen ? point(*chosen) : nlohmann::ordered_json();
  j["heldout"] = point(heldout);
  j["heldout_false_positive"] = heldout_false_positive;
  j["heldout_false_negative"] = heldout_false_negative;
  return j;
}

// ---------------------------------------------------------------------------

std::string_view to_string(LookupStatus s) {
  switch (s) {
    case LookupStatus::kNewDoi: return "NEW_DOI";
    case LookupStatus::kNoMatch: return "NO_MATCH";
    case LookupStatus::kInvalidRequest: return "INVALID_REQUEST";
    case LookupStatus::kUnparseable: return "UNPARSEABLE";
    case LookupStatus::kTransientFailure: return "TRANSIENT_FAILURE";
    case LookupStatus::kSkipped: return "SKIPPED";
  }
  return "?";
}

nlohmann::ordered_json to_json(const Enrichment& e) {
  nlohmann::ordered_json j;
  j["key"] = e.key;
  j["status"] = std::string(to_string(e.status));
  j["doi"] = e.doi;
  j["score"] = e.score;
  j["rank"] = e.rank;
  return j;
}

nlohmann::ordered_json EnrichmentReport::to_json() const {
  nlohmann::ordered_json j;
  j["eligible"] = eligible;
  j["queries"] = queries;
  j["network_calls"] = network_calls;
  j["by_status"] = by_status;
  j["enriched"] = enriched;
  j["unique_dois"] = unique_dois;
  return j;
}

std::vector<Enrichment> enrich_corpus(const std::vector<CitationRecord>& records,
                                      const std::vector<ClassLabel>& predicted, CrossrefClient& client,
                                      const LookupConfig& cfg, EnrichmentReport* report) {
  if (records.size() != predicted.size()) throw std::invalid_argument("records and predictions differ in length");
  std::vector<Enrichment> out;
  std::vector<LookupQuery> queries;
  std::vector<std::size_t> query_slot;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (predicted[i] != ClassLabel::kJournal || r.citation.has_id(IdKind::kDoi)) continue;
    Enrichment e;
    e.key = std::to_string(r.page_id) + ":" + std::to_string(r.order_index);
    if (auto q = build_query(r)) {
      queries.push_back(std::move(*q));
      query_slot.push_back(out.size());
    }
    out.push_back(std::move(e));
  }
  const auto before = client.network_calls();
  const auto results = fetch_all(client, queries, cfg.workers);
  for (std::size_t k = 0; k < results.size(); ++k) {
    auto& e = out[query_slot[k]];
    const auto& r = results[k];
    switch (r.outcome) {
      case FetchOutcome::kInvalidRequest: e.status = LookupStatus::kInvalidRequest; break;
      case FetchOutcome::kUnparseable: e.status = LookupStatus::kUnparseable; break;
      case FetchOutcome::kTransientFailure: e.status = LookupStatus::kTransientFailure; break;
      case FetchOutcome::kOk:
        if (auto doi = select_doi(r.candidates, cfg)) {
          e.status = LookupStatus::kNewDoi;
          e.doi = *doi;
          e.score = r.candidates.front().score;
          e.rank = 1;
        } else {
          e.status = LookupStatus::kNoMatch;
        }
        break;
    }
  }
  if (report) {
    *report = {};
    report->eligible = out.size();
    report->queries = queries.size();
    report->network_calls = client.network_calls() - before;
    std::set<std::string> dois;
    for (const auto& e : out) {
      ++report->by_status[std::string(to_string(e.status))];
      if (e.status == LookupStatus::kNewDoi) {
        ++report->enriched;
        dois.insert(e.doi);
      }
    }
    report->unique_dois = dois.size();
  }
  return out;
}

}  // namespace wikicite
