#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wikicite/labels.hpp"
#include "wikicite/uniform.hpp"

namespace wikicite {

struct LookupQuery {
  std::string title;
  std::string first_author;
  std::string key;  // provenance: "<page_id>:<order_index>"
};

// Query for a record, or nullopt when the title is empty.
std::optional<LookupQuery> build_query(const CitationRecord& r);

// Request target on the works endpoint, e.g. "/works?query.bibliographic=...&rows=3".
std::string request_target(const LookupQuery& q, std::size_t rows);
std::string percent_encode(std::string_view s);
std::string query_hash(const std::string& request);

struct CrossrefCandidate {
  std::string doi;
  double score = 0.0;
  int rank = 0;
  std::string title;
  std::string container_title;
  std::optional<int> year;
};

struct LookupConfig {
  int max_rps = 50;
  std::size_t retained_results = 3;
  double score_threshold = 34.997;
  int max_attempts = 3;
  double backoff_initial_s = 1.0;
  double timeout_s = 30.0;
  std::size_t workers = 32;
  std::filesystem::path cache_dir;
  std::string endpoint = "https://api.crossref.org";
  std::string mailto;  // contact sent with every request

  std::vector<std::string> violations() const;
};

// ---------------------------------------------------------------------------
// Time

class Clock {
public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
  virtual void sleep_until(double t) = 0;
};

class SystemClock final : public Clock {
public:
  double now() override;
  void sleep_until(double t) override;
};

// Time only moves when someone sleeps or advances it.
class SimulatedClock final : public Clock {
public:
  explicit SimulatedClock(double start = 0.0) : now_(start) {}
  double now() override;
  void sleep_until(double t) override;
  void advance(double dt);

private:
  std::mutex mu_;
  double now_;
};

// Sliding-log limiter: a request may go out at time t only if fewer than `max_requests`
// requests were issued in (t - window, t]. This bounds every window, not just aligned ones.
class RateLimiter {
public:
  RateLimiter(int max_requests, double window_s, Clock& clock);
  // Blocks on the clock until a slot is free; returns the issue time.
  double acquire();

private:
  int max_;
  double window_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<double> issued_;
};

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;  // 0 when the request never completed
  std::string body;
  std::string error;
};

class Transport {
public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& target) = 0;
};

class HttpTransport final : public Transport {
public:
  explicit HttpTransport(const LookupConfig& cfg);
  HttpResponse get(const std::string& target) override;

private:
  LookupConfig cfg_;
};

// Serves recorded responses keyed by query hash; lines are
// {"query_hash", "request", "response_body", "status"}.
class ReplayTransport final : public Transport {
public:
  static ReplayTransport load(const std::filesystem::path& path);
  void add(const std::string& request, int status, std::string body);
  HttpResponse get(const std::string& target) override;
  std::size_t size() const { return records_.size(); }

private:
  std::map<std::string, HttpResponse> records_;
};

// ---------------------------------------------------------------------------
// Fetching

enum class FetchOutcome { kOk, kInvalidRequest, kUnparseable, kTransientFailure };
std::string_view to_string(FetchOutcome o);

struct FetchResult {
  FetchOutcome outcome = FetchOutcome::kOk;
  std::vector<CrossrefCandidate> candidates;
  int http_status = 0;
  int attempts = 0;
  bool from_cache = false;
};

class CacheCorruption : public UserError {
public:
  using UserError::UserError;
};

// Parses a works-endpoint response body; throws std::runtime_error when it is not one.
std::vector<CrossrefCandidate> parse_candidates(const std::string& body, std::size_t keep);

class CrossrefClient {
public:
  CrossrefClient(LookupConfig cfg, Transport& transport, Clock& clock);

  FetchResult fetch(const LookupQuery& q);
  std::uint64_t network_calls() const { return network_calls_; }

private:
  std::optional<HttpResponse> cache_read(const std::string& hash, const std::string& request) const;
  void cache_write(const std::string& hash, const std::string& request, const HttpResponse& r) const;

  LookupConfig cfg_;
  Transport& transport_;
  Clock& clock_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> network_calls_{0};
};

// Rank-1 DOI when its score reaches the threshold.
std::optional<std::string> select_doi(const std::vector<CrossrefCandidate>& candidates, const LookupConfig& cfg);

// Fetches every query with up to `workers` in flight; identical requests are fetched once.
// Results come back in input order.
std::vector<FetchResult> fetch_all(CrossrefClient& client, const std::vector<LookupQuery>& queries,
                                   std::size_t workers);

// ---------------------------------------------------------------------------
// Heuristic evaluation

struct GoldPair {
  LookupQuery query;
  std::string doi;  // normalized
};

// Line-delimited {"title", "author", "doi"} records; the DOI is normalized on load.
std::vector<GoldPair> load_gold(const std::filesystem::path& path);

struct HeuristicRow {
  int rank = 0;
  std::size_t matched = 0;
  std::size_t not_matched = 0;
  std::size_t invalid_http = 0;      // 4xx
  std::size_t invalid_response = 0;  // unparseable body
  std::size_t transient = 0;
  std::size_t invalid() const { return invalid_http + invalid_response; }
};

struct ThresholdPoint {
  double threshold = 0.0;
  std::size_t predicted = 0;
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct HeuristicReport {
  std::size_t tuning_size = 0;
  std::size_t heldout_size = 0;
  std::vector<HeuristicRow> rows;  // ranks 1..3 on the tuning split
  std::vector<ThresholdPoint> grid;
  std::optional<ThresholdPoint> chosen;
  ThresholdPoint heldout;  // at the chosen threshold
  std::size_t heldout_false_positive = 0;
  std::size_t heldout_false_negative = 0;

  nlohmann::ordered_json to_json() const;
};

// Precision/recall of the first-result heuristic at one threshold.
ThresholdPoint score_threshold(const std::vector<const FetchResult*>& results, const std::vector<const GoldPair*>& gold,
                               double threshold);

// |P - R| minimal, ties broken by larger P + R, then by the smaller threshold.
std::optional<ThresholdPoint> choose_threshold(const std::vector<ThresholdPoint>& grid);

HeuristicReport evaluate_heuristics(const std::vector<GoldPair>& gold, const std::vector<FetchResult>& results,
                                    double tuning_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Enrichment

enum class LookupStatus { kNewDoi, kNoMatch, kInvalidRequest, kUnparseable, kTransientFailure, kSkipped };
std::string_view to_string(LookupStatus s);

struct Enrichment {
  std::string key;
  LookupStatus status = LookupStatus::kSkipped;
  std::string doi;
  double score = 0.0;
  int rank = 0;
};

struct EnrichmentReport {
  std::size_t eligible = 0;
  std::size_t queries = 0;
  std::size_t network_calls = 0;
  std::map<std::string, std::size_t> by_status;
  std::size_t enriched = 0;
  std::size_t unique_dois = 0;

  nlohmann::ordered_json to_json() const;
};

// Looks up every record that was predicted JOURNAL_ARTICLE and has no DOI.
std::vector<Enrichment> enrich_corpus(const std::vector<CitationRecord>& records,
                                      const std::vector<ClassLabel>& predicted, CrossrefClient& client,
                                      const LookupConfig& cfg, EnrichmentReport* report);

nlohmann::ordered_json to_json(const Enrichment& e);

}  // namespace wikicite
