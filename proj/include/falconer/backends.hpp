#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "falconer/primitives.hpp"

namespace falconer {

/// Scores at or above this threshold answer "yes".
inline constexpr double kYesThreshold = 0.5;

enum class Answer { Yes, No };
std::string_view to_string(Answer a);

struct ClassifyItem {
  std::string text;
  std::string label;
};

struct ClassifyResult {
  double score = 0.0;
  Answer answer = Answer::No;

  static ClassifyResult from_score(double score);
  bool operator==(const ClassifyResult&) const = default;
};

struct ExtractItem {
  std::string text;
  std::string instruction;
};

struct ExtractResult {
  SpanSet spans;
  bool operator==(const ExtractResult&) const = default;
};

enum class BackendKind { Mock, HttpProxy, LlmAnnotator };
std::string_view to_string(BackendKind kind);

struct CostModel {
  double per_call = 0.0;
  double per_1k_chars = 0.0;
};

/// Deterministic latency charged instead of measured wall time.
struct LatencyModel {
  std::chrono::microseconds per_call{0};
  std::chrono::microseconds per_item{0};
};

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::Mock;
  CostModel cost;
  std::size_t max_batch = 64;
  std::size_t max_in_flight = 8;
  std::optional<LatencyModel> simulated_latency;
  /// Free-form facts about the model behind the backend (size, FLOPs, ...).
  nlohmann::json metadata = nlohmann::json::object();

  void validate() const;
};

BackendDescriptor descriptor_from_json(const nlohmann::json& j, BackendDescriptor defaults = {});
nlohmann::json to_json(const BackendDescriptor& d);

struct BackendStats {
  std::uint64_t wire_calls = 0;
  std::uint64_t items_sent = 0;
  std::uint64_t chars_sent = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t invalid_spans_dropped = 0;
  std::uint64_t failed_items = 0;
  std::chrono::nanoseconds wall_time{0};

  BackendStats operator-(const BackendStats& earlier) const;
};

/// Outcome for one item: a value, or the error that prevented it.
template <typename T>
struct Attempt {
  std::optional<T> value;
  std::exception_ptr error;

  bool ok() const noexcept { return value.has_value(); }
};

struct DispatchOptions {
  std::size_t parallel = 1;
  bool use_cache = true;
  /// Caps the chunk size below descriptor().max_batch when non-zero.
  std::size_t batch = 0;
};

enum class Primitive { Label, Span };

/// Length-prefixed SHA-256 over the four fields, hex encoded.
std::string cache_key(std::string_view backend_id, Primitive primitive, std::string_view instruction,
                      std::string_view text);

/// Content-addressed result store: an in-memory map, optionally backed by
/// one file per key under `dir`. Concurrent readers, serialized writers.
class ResultCache {
 public:
  explicit ResultCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& value);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, nlohmann::json> memory_;
};

/// Common batching, caching and accounting for every inference provider.
/// Subclasses implement one wire request per call of classify_batch /
/// extract_batch.
class Backend {
 public:
  explicit Backend(BackendDescriptor descriptor);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendDescriptor& descriptor() const noexcept { return descriptor_; }
  void set_cache(std::shared_ptr<ResultCache> cache) { cache_ = std::move(cache); }
  const std::shared_ptr<ResultCache>& cache() const noexcept { return cache_; }

  std::vector<Attempt<ClassifyResult>> try_classify(std::span<const ClassifyItem> items,
                                                     const DispatchOptions& options = {});
  std::vector<Attempt<ExtractResult>> try_extract(std::span<const ExtractItem> items,
                                                   const DispatchOptions& options = {});

  /// As try_*, but rethrows the first item failure.
  std::vector<ClassifyResult> classify(std::span<const ClassifyItem> items, const DispatchOptions& options = {});
  std::vector<ExtractResult> extract(std::span<const ExtractItem> items, const DispatchOptions& options = {});

  BackendStats stats() const;
  void reset_stats();

 protected:
  virtual std::vector<ClassifyResult> classify_batch(std::span<const ClassifyItem> items) = 0;
  virtual std::vector<ExtractResult> extract_batch(std::span<const ExtractItem> items) = 0;

  void count_dropped_spans(std::uint64_t n);

 private:
  template <typename Item, typename Result, typename Call, typename Encode, typename Decode>
  std::vector<Attempt<Result>> dispatch(std::span<const Item> items, const DispatchOptions& options,
                                        Primitive primitive, Call call, Encode encode, Decode decode);

  // Keeps in-bounds, non-overlapping, surface-consistent spans; counts the rest.
  ExtractResult sanitize(const ExtractItem& item, ExtractResult result);

  BackendDescriptor descriptor_;
  std::shared_ptr<ResultCache> cache_;
  mutable std::mutex stats_mutex_;
  BackendStats stats_;
};

nlohmann::json to_json(const ClassifyResult& r);
ClassifyResult classify_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Span& s);
nlohmann::json to_json(const std::vector<Span>& spans);
std::vector<Span> spans_from_json(const nlohmann::json& j);

// --- mock -------------------------------------------------------------------

/// Rule-table backend. Pure function of (rules, item).
///
/// Rules JSON:
///   {"classify": [{"instruction_contains": "finance",
///                  "keywords": ["finance", "market"],
///                  "fixed_scores": {"<exact text>": 0.7}}],
///    "extract":  [{"instruction_contains": "price", "patterns": ["$<digits>"]}],
///    "descriptor": {...}}
/// The first rule whose instruction_contains occurs (case-insensitively) in
/// the label/instruction applies. Keywords match whole tok-v1 tokens,
/// case-insensitively. Patterns are literals in which `<digits>` stands for
/// one or more ASCII digits.
class MockBackend final : public Backend {
 public:
  MockBackend(const nlohmann::json& rules, BackendDescriptor descriptor);

  static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& rules_path,
                                                 std::optional<BackendDescriptor> descriptor = std::nullopt);

  ClassifyResult classify_one(const ClassifyItem& item) const;
  ExtractResult extract_one(const ExtractItem& item) const;

 protected:
  std::vector<ClassifyResult> classify_batch(std::span<const ClassifyItem> items) override;
  std::vector<ExtractResult> extract_batch(std::span<const ExtractItem> items) override;

 private:
  struct ClassifyRule {
    std::string instruction_contains;
    std::vector<std::vector<std::string>> keywords;  // lowercased token sequences
    std::unordered_map<std::string, double> fixed_scores;
  };
  struct PatternPart {
    bool digits = false;
    std::u32string literal;
  };
  struct ExtractRule {
    std::string instruction_contains;
    std::vector<std::vector<PatternPart>> patterns;
  };

  std::vector<ClassifyRule> classify_rules_;
  std::vector<ExtractRule> extract_rules_;
};

// --- wire backends ------------------------------------------------------------

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::seconds timeout{60};
};

/// POSTs JSON to base_url + path. Retries transport failures and 5xx with
/// exponential backoff; throws BackendUnavailable when retries run out and
/// ProtocolError on other HTTP errors or unparseable bodies.
nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const std::string& api_key, const RetryPolicy& policy);

/// Remote proxy model speaking the /v1/classify and /v1/extract protocol.
class HttpProxyBackend final : public Backend {
 public:
  HttpProxyBackend(std::string base_url, BackendDescriptor descriptor, std::string api_key = {},
                   RetryPolicy policy = {});

 protected:
  std::vector<ClassifyResult> classify_batch(std::span<const ClassifyItem> items) override;
  std::vector<ExtractResult> extract_batch(std::span<const ExtractItem> items) override;

 private:
  std::string base_url_;
  std::string api_key_;
  RetryPolicy policy_;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

/// OpenAI-compatible POST {base}/v1/chat/completions at temperature 0.
class OpenAiChatClient final : public ChatClient {
 public:
  OpenAiChatClient(std::string base_url, std::string model, std::string api_key, RetryPolicy policy = {});
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  RetryPolicy policy_;
};

/// LLM annotator: one chat completion per item, strict JSON replies.
class LlmAnnotatorBackend final : public Backend {
 public:
  LlmAnnotatorBackend(std::shared_ptr<ChatClient> chat, BackendDescriptor descriptor);

  static std::string classify_prompt(const ClassifyItem& item);
  static std::string extract_prompt(const ExtractItem& item);

  /// Parses {"answer": "yes"|"no"} (optionally with "score").
  static ClassifyResult parse_classify_reply(std::string_view reply);
  /// Parses {"spans": [...]}; out-of-bounds offsets are rejected, surface
  /// mismatches re-anchored by exact substring search. Returns the number of
  /// spans rejected through `rejected`.
  static ExtractResult parse_extract_reply(std::string_view reply, std::string_view text, std::size_t& rejected);

 protected:
  std::vector<ClassifyResult> classify_batch(std::span<const ClassifyItem> items) override;
  std::vector<ExtractResult> extract_batch(std::span<const ExtractItem> items) override;

 private:
  std::shared_ptr<ChatClient> chat_;
};

/// First JSON object embedded in free text (fenced or bare), if any.
std::optional<nlohmann::json> find_json_object(std::string_view text);

/// Environment variable or empty string.
std::string env_or(const char* name, std::string fallback = {});

/// Builds a backend from "mock:<rules.json>", "proxy[:<url>]" or
/// "annotator[:<url>]#<model>". Missing URLs fall back to FALCONER_PROXY_URL
/// and FALCONER_PLANNER_URL.
std::unique_ptr<Backend> make_backend(std::string_view spec);

}  // namespace falconer
