#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "falconer/backends.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "falconer/digest.hpp"
#include "falconer/error.hpp"
#include "falconer/text.hpp"

namespace falconer {

using nlohmann::json;

std::string_view to_string(Answer a) { return a == Answer::Yes ? "yes" : "no"; }

ClassifyResult ClassifyResult::from_score(double score) {
  return {score, score >= kYesThreshold ? Answer::Yes : Answer::No};
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Mock: return "mock";
    case BackendKind::HttpProxy: return "http_proxy";
    case BackendKind::LlmAnnotator: return "llm_annotator";
  }
  return "?";
}

void BackendDescriptor::validate() const {
  if (max_batch < 1) throw Error(ErrorCode::InvalidArgument, "backend " + id + ": max_batch must be >= 1");
  if (max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "backend " + id + ": max_in_flight must be >= 1");
  if (cost.per_call < 0 || cost.per_1k_chars < 0) {
    throw Error(ErrorCode::InvalidArgument, "backend " + id + ": costs must be >= 0");
  }
}

BackendDescriptor descriptor_from_json(const json& j, BackendDescriptor d) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "descriptor must be an object");
  d.id = j.value("id", d.id);
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "mock") d.kind = BackendKind::Mock;
    else if (kind == "http_proxy") d.kind = BackendKind::HttpProxy;
    else if (kind == "llm_annotator") d.kind = BackendKind::LlmAnnotator;
    else throw Error(ErrorCode::InvalidArgument, "unknown backend kind '" + kind + "'");
  }
  if (j.contains("cost_model")) {
    const auto& c = j.at("cost_model");
    d.cost.per_call = c.value("per_call", d.cost.per_call);
    d.cost.per_1k_chars = c.value("per_1k_chars", d.cost.per_1k_chars);
  }
  d.max_batch = j.value("max_batch", d.max_batch);
  d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
  if (j.contains("simulated_latency_us")) {
    const auto& l = j.at("simulated_latency_us");
    d.simulated_latency = LatencyModel{std::chrono::microseconds(l.value("per_call", 0)),
                                       std::chrono::microseconds(l.value("per_item", 0))};
  }
  if (j.contains("metadata")) d.metadata = j.at("metadata");
  d.validate();
  return d;
}

json to_json(const BackendDescriptor& d) {
  json j{{"id", d.id},
         {"kind", to_string(d.kind)},
         {"cost_model", {{"per_call", d.cost.per_call}, {"per_1k_chars", d.cost.per_1k_chars}}},
         {"max_batch", d.max_batch},
         {"max_in_flight", d.max_in_flight},
         {"metadata", d.metadata}};
  if (d.simulated_latency) {
    j["simulated_latency_us"] = {{"per_call", d.simulated_latency->per_call.count()},
                                 {"per_item", d.simulated_latency->per_item.count()}};
  }
  return j;
}

BackendStats BackendStats::operator-(const BackendStats& e) const {
  return {wire_calls - e.wire_calls,     items_sent - e.items_sent,
          chars_sent - e.chars_sent,     cache_hits - e.cache_hits,
          invalid_spans_dropped - e.invalid_spans_dropped, failed_items - e.failed_items,
          wall_time - e.wall_time};
}

// --- serialization helpers ------------------------------------------------------

json to_json(const ClassifyResult& r) { return {{"score", r.score}, {"answer", to_string(r.answer)}}; }

ClassifyResult classify_result_from_json(const json& j) {
  return ClassifyResult::from_score(j.at("score").get<double>());
}

json to_json(const Span& s) { return {{"start", s.start}, {"end", s.end}, {"surface", s.surface}}; }

json to_json(const std::vector<Span>& spans) {
  json arr = json::array();
  for (const auto& s : spans) arr.push_back(to_json(s));
  return arr;
}

std::vector<Span> spans_from_json(const json& j) {
  std::vector<Span> out;
  for (const auto& s : j) {
    out.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(), s.at("surface").get<std::string>()});
  }
  return out;
}

// --- cache ------------------------------------------------------------------

std::string cache_key(std::string_view backend_id, Primitive primitive, std::string_view instruction,
                      std::string_view text) {
  std::string framed;
  auto append = [&](std::string_view field) {
    std::uint64_t len = field.size();
    for (int i = 0; i < 8; ++i) framed.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
    framed.append(field);
  };
  append(backend_id);
  append(primitive == Primitive::Label ? "label" : "span");
  append(instruction);
  append(text);
  return sha256_hex(framed);
}

ResultCache::ResultCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<json> ResultCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mutex_);
    if (const auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / key);
  if (!in) return std::nullopt;
  json value;
  try {
    in >> value;
  } catch (const json::exception&) {
    return std::nullopt;
  }
  std::unique_lock lock(mutex_);
  memory_.emplace(key, value);
  return value;
}

void ResultCache::put(const std::string& key, const json& value) {
  std::unique_lock lock(mutex_);
  memory_[key] = value;
  if (dir_) {
    const auto tmp = *dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write cache entry " + tmp.string());
      out << value.dump();
    }
    std::filesystem::rename(tmp, *dir_ / key);
  }
}

std::size_t ResultCache::size() const {
  std::shared_lock lock(mutex_);
  return memory_.size();
}

// --- Backend ------------------------------------------------------------------

Backend::Backend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) { descriptor_.validate(); }

BackendStats Backend::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

void Backend::reset_stats() {
  std::lock_guard lock(stats_mutex_);
  stats_ = {};
}

void Backend::count_dropped_spans(std::uint64_t n) {
  std::lock_guard lock(stats_mutex_);
  stats_.invalid_spans_dropped += n;
}

namespace {

std::string_view instruction_of(const ClassifyItem& item) { return item.label; }
std::string_view instruction_of(const ExtractItem& item) { return item.instruction; }

}  // namespace

template <typename Item, typename Result, typename Call, typename Encode, typename Decode>
std::vector<Attempt<Result>> Backend::dispatch(std::span<const Item> items, const DispatchOptions& options,
                                               Primitive primitive, Call call, Encode encode, Decode decode) {
  const std::size_t n = items.size();
  std::vector<Attempt<Result>> out(n);
  const bool caching = options.use_cache && cache_ != nullptr;

  std::vector<std::string> keys(caching ? n : 0);
  std::vector<std::size_t> misses;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (caching) {
      keys[i] = cache_key(descriptor_.id, primitive, instruction_of(items[i]), items[i].text);
      if (auto hit = cache_->get(keys[i])) {
        out[i].value = decode(*hit);
        ++hits;
        continue;
      }
    }
    misses.push_back(i);
  }
  {
    std::lock_guard lock(stats_mutex_);
    stats_.cache_hits += hits;
  }

  std::size_t chunk = descriptor_.max_batch;
  if (options.batch > 0) chunk = std::min(chunk, options.batch);
  const std::size_t chunks = (misses.size() + chunk - 1) / chunk;
  if (chunks == 0) return out;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t first = c * chunk;
    const std::size_t last = std::min(misses.size(), first + chunk);
    std::vector<Item> batch;
    batch.reserve(last - first);
    std::uint64_t chars = 0;
    for (std::size_t k = first; k < last; ++k) {
      batch.push_back(items[misses[k]]);
      chars += text::scalar_length(items[misses[k]].text) + text::scalar_length(instruction_of(items[misses[k]]));
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::exception_ptr failure;
    std::vector<Result> results;
    try {
      results = call(std::span<const Item>(batch));
      if (results.size() != batch.size()) {
        throw Error(ErrorCode::ProtocolError, "backend " + descriptor_.id + " returned " +
                                                  std::to_string(results.size()) + " results for " +
                                                  std::to_string(batch.size()) + " items");
      }
    } catch (...) {
      failure = std::current_exception();
    }
    std::chrono::nanoseconds elapsed = std::chrono::steady_clock::now() - t0;
    if (descriptor_.simulated_latency) {
      elapsed = descriptor_.simulated_latency->per_call +
                descriptor_.simulated_latency->per_item * static_cast<std::int64_t>(batch.size());
    }
    {
      std::lock_guard lock(stats_mutex_);
      stats_.wire_calls += 1;
      stats_.items_sent += batch.size();
      stats_.chars_sent += chars;
      stats_.wall_time += elapsed;
      if (failure) stats_.failed_items += batch.size();
    }

    for (std::size_t k = first; k < last; ++k) {
      const auto idx = misses[k];
      if (failure) {
        out[idx].error = failure;
        continue;
      }
      out[idx].value = std::move(results[k - first]);
      if (caching) cache_->put(keys[idx], encode(*out[idx].value));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min({options.parallel, descriptor_.max_in_flight, chunks}));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run_chunk(c);
    });
  }
  pool.clear();  // joins
  return out;
}

ExtractResult Backend::sanitize(const ExtractItem& item, ExtractResult result) {
  auto& spans = result.spans.spans;
  std::stable_sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.start < b.start; });
  const text::ScalarIndex index(item.text);
  std::vector<Span> kept;
  std::uint64_t dropped = 0;
  for (auto& s : spans) {
    const bool in_bounds = s.start < s.end && s.end <= index.size();
    const bool disjoint = kept.empty() || s.start >= kept.back().end;
    if (in_bounds && disjoint && index.slice(item.text, s.start, s.end) == s.surface) {
      kept.push_back(std::move(s));
    } else {
      ++dropped;
    }
  }
  spans = std::move(kept);
  if (dropped > 0) count_dropped_spans(dropped);
  return result;
}

std::vector<Attempt<ClassifyResult>> Backend::try_classify(std::span<const ClassifyItem> items,
                                                            const DispatchOptions& options) {
  return dispatch<ClassifyItem, ClassifyResult>(
      items, options, Primitive::Label,
      [this](std::span<const ClassifyItem> batch) {
        auto results = classify_batch(batch);
        for (auto& r : results) r = ClassifyResult::from_score(std::clamp(r.score, 0.0, 1.0));
        return results;
      },
      [](const ClassifyResult& r) { return to_json(r); },
      [](const json& j) { return classify_result_from_json(j); });
}

std::vector<Attempt<ExtractResult>> Backend::try_extract(std::span<const ExtractItem> items,
                                                          const DispatchOptions& options) {
  return dispatch<ExtractItem, ExtractResult>(
      items, options, Primitive::Span,
      [this](std::span<const ExtractItem> batch) {
        auto results = extract_batch(batch);
        for (std::size_t i = 0; i < results.size() && i < batch.size(); ++i) {
          results[i] = sanitize(batch[i], std::move(results[i]));
        }
        return results;
      },
      [](const ExtractResult& r) { return json{{"spans", to_json(r.spans.spans)}}; },
      [](const json& j) {
        ExtractResult r;
        r.spans.spans = spans_from_json(j.at("spans"));
        return r;
      });
}

namespace {

template <typename T>
std::vector<T> unwrap(std::vector<Attempt<T>> attempts) {
  std::vector<T> out;
  out.reserve(attempts.size());
  for (auto& a : attempts) {
    if (!a.ok()) std::rethrow_exception(a.error);
    out.push_back(std::move(*a.value));
  }
  return out;
}

}  // namespace

std::vector<ClassifyResult> Backend::classify(std::span<const ClassifyItem> items, const DispatchOptions& options) {
  for (const auto& item : items) {
    if (item.text.empty() || item.label.empty()) throw Error(ErrorCode::InvalidArgument, "classify item with empty text or label");
  }
  return unwrap(try_classify(items, options));
}

std::vector<ExtractResult> Backend::extract(std::span<const ExtractItem> items, const DispatchOptions& options) {
  for (const auto& item : items) {
    if (item.text.empty() || item.instruction.empty()) {
      throw Error(ErrorCode::InvalidArgument, "extract item with empty text or instruction");
    }
  }
  return unwrap(try_extract(items, options));
}

// --- MockBackend ----------------------------------------------------------------

namespace {

std::vector<std::string> lowered_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : tokenize(s)) out.push_back(text::lowercase(t.surface));
  return out;
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

MockBackend::MockBackend(const json& rules, BackendDescriptor descriptor) : Backend(std::move(descriptor)) {
  if (!rules.is_object()) throw Error(ErrorCode::InvalidArgument, "mock rules must be a JSON object");
  for (const char* key : {"classify", "extract"}) {
    if (rules.contains(key) && !rules.at(key).is_array()) {
      throw Error(ErrorCode::InvalidArgument, std::string("mock rules: \"") + key + "\" must be an array");
    }
  }
  for (const auto& r : rules.value("classify", json::array())) {
    ClassifyRule rule;
    rule.instruction_contains = text::lowercase(r.at("instruction_contains").get<std::string>());
    for (const auto& k : r.value("keywords", json::array())) rule.keywords.push_back(lowered_tokens(k.get<std::string>()));
    const auto fixed = r.value("fixed_scores", json::object());
    for (const auto& [t, s] : fixed.items()) rule.fixed_scores.emplace(t, s.get<double>());
    classify_rules_.push_back(std::move(rule));
  }
  for (const auto& r : rules.value("extract", json::array())) {
    ExtractRule rule;
    rule.instruction_contains = text::lowercase(r.at("instruction_contains").get<std::string>());
    for (const auto& p : r.at("patterns")) {
      const auto pattern = text::decode(p.get<std::string>());
      static const std::u32string kDigits = U"<digits>";
      std::vector<PatternPart> parts;
      for (std::size_t i = 0; i < pattern.size();) {
        if (std::u32string_view(pattern.data() + i, pattern.size() - i).starts_with(kDigits)) {
          parts.push_back({true, {}});
          i += kDigits.size();
          continue;
        }
        if (parts.empty() || parts.back().digits) parts.push_back({false, {}});
        parts.back().literal.push_back(pattern[i++]);
      }
      if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "empty extract pattern");
      rule.patterns.push_back(std::move(parts));
    }
    extract_rules_.push_back(std::move(rule));
  }
}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& rules_path,
                                                    std::optional<BackendDescriptor> descriptor) {
  std::ifstream in(rules_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mock rules " + rules_path.string());
  json rules;
  try {
    in >> rules;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "bad mock rules " + rules_path.string() + ": " + e.what());
  }
  BackendDescriptor d;
  if (descriptor) {
    d = *descriptor;
  } else {
    d.id = "mock:" + rules_path.filename().string();
    if (rules.contains("descriptor")) d = descriptor_from_json(rules.at("descriptor"), d);
  }
  return std::make_unique<MockBackend>(rules, std::move(d));
}

ClassifyResult MockBackend::classify_one(const ClassifyItem& item) const {
  const auto label = text::lowercase(item.label);
  for (const auto& rule : classify_rules_) {
    if (label.find(rule.instruction_contains) == std::string::npos) continue;
    if (const auto it = rule.fixed_scores.find(item.text); it != rule.fixed_scores.end()) {
      return ClassifyResult::from_score(it->second);
    }
    const auto tokens = lowered_tokens(item.text);
    const bool hit = std::any_of(rule.keywords.begin(), rule.keywords.end(),
                                 [&](const auto& kw) { return contains_sequence(tokens, kw); });
    return ClassifyResult::from_score(hit ? 1.0 : 0.0);
  }
  return ClassifyResult::from_score(0.0);
}

ExtractResult MockBackend::extract_one(const ExtractItem& item) const {
  ExtractResult result;
  const auto instruction = text::lowercase(item.instruction);
  const auto rule = std::find_if(extract_rules_.begin(), extract_rules_.end(), [&](const ExtractRule& r) {
    return instruction.find(r.instruction_contains) != std::string::npos;
  });
  if (rule == extract_rules_.end()) return result;

  const auto s = text::decode(item.text);
  const auto is_digit = [](char32_t c) { return c >= U'0' && c <= U'9'; };

  // Length of the match of `parts` at position p, or 0.
  auto match_at = [&](const std::vector<PatternPart>& parts, std::size_t p) -> std::size_t {
    std::size_t q = p;
    for (const auto& part : parts) {
      if (part.digits) {
        const std::size_t d0 = q;
        while (q < s.size() && is_digit(s[q])) ++q;
        if (q == d0) return 0;
      } else {
        if (q + part.literal.size() > s.size() ||
            !std::equal(part.literal.begin(), part.literal.end(), s.begin() + static_cast<std::ptrdiff_t>(q))) {
          return 0;
        }
        q += part.literal.size();
      }
    }
    // Matches may not start or end inside a word.
    if (p > 0 && text::is_alnum(s[p]) && text::is_alnum(s[p - 1])) return 0;
    if (q < s.size() && q > p && text::is_alnum(s[q - 1]) && text::is_alnum(s[q])) return 0;
    return q - p;
  };

  for (std::size_t p = 0; p < s.size();) {
    std::size_t best = 0;
    for (const auto& parts : rule->patterns) best = std::max(best, match_at(parts, p));
    if (best == 0) {
      ++p;
      continue;
    }
    result.spans.spans.push_back(make_span(item.text, p, p + best));
    p += best;
  }
  return result;
}

std::vector<ClassifyResult> MockBackend::classify_batch(std::span<const ClassifyItem> items) {
  std::vector<ClassifyResult> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(classify_one(item));
  return out;
}

std::vector<ExtractResult> MockBackend::extract_batch(std::span<const ExtractItem> items) {
  std::vector<ExtractResult> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(extract_one(item));
  return out;
}

// --- HTTP -----------------------------------------------------------------------

json post_json(const std::string& base_url, const std::string& path, const json& body, const std::string& api_key,
               const RetryPolicy& policy) {
  std::string origin = base_url;
  std::string prefix;
  if (const auto scheme = base_url.find("://"); scheme != std::string::npos) {
    if (const auto slash = base_url.find('/', scheme + 3); slash != std::string::npos) {
      origin = base_url.substr(0, slash);
      prefix = base_url.substr(slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(origin);
  if (!client.is_valid()) throw Error(ErrorCode::BackendUnavailable, "invalid endpoint URL '" + base_url + "'");
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(policy.timeout).count(), 0);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(policy.timeout).count(), 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(policy.backoff_base * (1 << (attempt - 1)));
    auto res = client.Post(prefix + path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::ProtocolError, base_url + path + " answered HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ProtocolError, base_url + path + " returned invalid JSON: " + e.what());
    }
  }
  throw Error(ErrorCode::BackendUnavailable, base_url + path + ": " + last_error + " after " +
                                                 std::to_string(policy.attempts) + " attempts");
}

HttpProxyBackend::HttpProxyBackend(std::string base_url, BackendDescriptor descriptor, std::string api_key,
                                   RetryPolicy policy)
    : Backend(std::move(descriptor)), base_url_(std::move(base_url)), api_key_(std::move(api_key)), policy_(policy) {}

namespace {

const json& results_array(const json& reply, std::size_t expected) {
  if (!reply.is_object() || !reply.contains("results") || !reply.at("results").is_array()) {
    throw Error(ErrorCode::ProtocolError, "reply lacks a \"results\" array");
  }
  const auto& results = reply.at("results");
  if (results.size() != expected) {
    throw Error(ErrorCode::ProtocolError,
                "reply has " + std::to_string(results.size()) + " results for " + std::to_string(expected) + " items");
  }
  return results;
}

}  // namespace

std::vector<ClassifyResult> HttpProxyBackend::classify_batch(std::span<const ClassifyItem> items) {
  json body{{"items", json::array()}};
  for (const auto& item : items) body["items"].push_back({{"text", item.text}, {"label", item.label}});
  const auto reply = post_json(base_url_, "/v1/classify", body, api_key_, policy_);
  std::vector<ClassifyResult> out;
  for (const auto& r : results_array(reply, items.size())) {
    if (!r.is_object() || !r.contains("score") || !r.at("score").is_number()) {
      throw Error(ErrorCode::ProtocolError, "classify result without numeric score");
    }
    const double score = r.at("score").get<double>();
    if (!(score >= 0.0 && score <= 1.0)) throw Error(ErrorCode::ProtocolError, "score outside [0,1]");
    out.push_back(ClassifyResult::from_score(score));
  }
  return out;
}

std::vector<ExtractResult> HttpProxyBackend::extract_batch(std::span<const ExtractItem> items) {
  json body{{"items", json::array()}};
  for (const auto& item : items) body["items"].push_back({{"text", item.text}, {"instruction", item.instruction}});
  const auto reply = post_json(base_url_, "/v1/extract", body, api_key_, policy_);
  const auto& results = results_array(reply, items.size());
  std::vector<ExtractResult> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& r = results[i];
    if (!r.is_object() || !r.contains("spans") || !r.at("spans").is_array()) {
      throw Error(ErrorCode::ProtocolError, "extract result without \"spans\" array");
    }
    ExtractResult er;
    const auto len = text::scalar_length(items[i].text);
    const text::ScalarIndex index(items[i].text);
    for (const auto& s : r.at("spans")) {
      if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.at("start").is_number_integer() ||
          !s.at("end").is_number_integer()) {
        throw Error(ErrorCode::ProtocolError, "span without integer start/end");
      }
      const auto start = s.at("start").get<long long>();
      const auto end = s.at("end").get<long long>();
      Span span{static_cast<std::size_t>(std::max(0LL, start)), static_cast<std::size_t>(std::max(0LL, end)), {}};
      if (start < 0) span.start = len + 1;  // force rejection in sanitize
      if (s.contains("surface") && s.at("surface").is_string()) {
        span.surface = s.at("surface").get<std::string>();
      } else if (span.start < span.end && span.end <= len) {
        span.surface = std::string(index.slice(items[i].text, span.start, span.end));
      }
      er.spans.spans.push_back(std::move(span));
    }
    out.push_back(std::move(er));
  }
  return out;
}

// --- chat / annotator ---------------------------------------------------------------

OpenAiChatClient::OpenAiChatClient(std::string base_url, std::string model, std::string api_key, RetryPolicy policy)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)), policy_(policy) {}

std::string OpenAiChatClient::complete(const std::vector<ChatMessage>& messages) {
  json body{{"model", model_}, {"messages", json::array()}, {"temperature", 0}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const auto reply = post_json(base_url_, "/v1/chat/completions", body, api_key_, policy_);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ProtocolError, "chat completion reply lacks choices[0].message.content");
  }
}

std::optional<json> find_json_object(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escape) escape = false;
        else if (c == '\\') escape = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        try {
          auto j = json::parse(text.substr(open, i - open + 1));
          if (j.is_object()) return j;
        } catch (const json::parse_error&) {
        }
        break;
      }
    }
  }
  return std::nullopt;
}

LlmAnnotatorBackend::LlmAnnotatorBackend(std::shared_ptr<ChatClient> chat, BackendDescriptor descriptor)
    : Backend([&] {
        descriptor.kind = BackendKind::LlmAnnotator;
        descriptor.max_batch = 1;
        return std::move(descriptor);
      }()),
      chat_(std::move(chat)) {}

std::string LlmAnnotatorBackend::classify_prompt(const ClassifyItem& item) {
  return "Decide whether the statement is true for the text.\n"
         "Text:\n" + item.text + "\n"
         "Statement: This text is about " + item.label + "\n"
         "Reply with only a JSON object: {\"answer\": \"yes\"} or {\"answer\": \"no\"}.";
}

std::string LlmAnnotatorBackend::extract_prompt(const ExtractItem& item) {
  return "Instruction: " + item.instruction + "\n"
         "Text:\n" + item.text + "\n"
         "Return every span of the text that answers the instruction. Offsets count Unicode code points "
         "from 0; end is exclusive; surface is the exact substring.\n"
         "Reply with only a JSON object: {\"spans\": [{\"start\": 0, \"end\": 5, \"surface\": \"...\"}]}. "
         "Use {\"spans\": []} when nothing applies.";
}

ClassifyResult LlmAnnotatorBackend::parse_classify_reply(std::string_view reply) {
  const auto j = find_json_object(reply);
  if (!j || !j->contains("answer") || !j->at("answer").is_string()) {
    throw Error(ErrorCode::ProtocolError, "annotator reply lacks {\"answer\": ...}");
  }
  const auto answer = text::lowercase(j->at("answer").get<std::string>());
  if (answer != "yes" && answer != "no") throw Error(ErrorCode::ProtocolError, "answer must be yes or no");
  if (j->contains("score") && j->at("score").is_number()) {
    return ClassifyResult::from_score(std::clamp(j->at("score").get<double>(), 0.0, 1.0));
  }
  return ClassifyResult::from_score(answer == "yes" ? 1.0 : 0.0);
}

ExtractResult LlmAnnotatorBackend::parse_extract_reply(std::string_view reply, std::string_view text,
                                                       std::size_t& rejected) {
  const auto j = find_json_object(reply);
  if (!j || !j->contains("spans") || !j->at("spans").is_array()) {
    throw Error(ErrorCode::ProtocolError, "annotator reply lacks {\"spans\": [...]}");
  }
  const auto scalars = text::decode(text);
  const text::ScalarIndex index(text);
  const auto len = scalars.size();
  ExtractResult out;
  std::vector<Span> accepted;

  auto overlaps = [&](std::size_t s, std::size_t e) {
    return std::any_of(accepted.begin(), accepted.end(), [&](const Span& a) { return s < a.end && a.start < e; });
  };
  auto anchor = [&](const std::string& surface) -> std::optional<Span> {
    const auto needle = text::decode(surface);
    if (needle.empty() || needle.size() > len) return std::nullopt;
    for (std::size_t p = 0; p + needle.size() <= len; ++p) {
      if (std::equal(needle.begin(), needle.end(), scalars.begin() + static_cast<std::ptrdiff_t>(p)) &&
          !overlaps(p, p + needle.size())) {
        return Span{p, p + needle.size(), surface};
      }
    }
    return std::nullopt;
  };

  for (const auto& s : j->at("spans")) {
    if (!s.is_object()) {
      ++rejected;
      continue;
    }
    const std::string surface = s.contains("surface") && s.at("surface").is_string() ? s.at("surface").get<std::string>() : "";
    const bool has_offsets = s.contains("start") && s.contains("end") && s.at("start").is_number_integer() &&
                             s.at("end").is_number_integer();
    if (has_offsets) {
      const auto start = s.at("start").get<long long>();
      const auto end = s.at("end").get<long long>();
      if (start < 0 || end <= start || static_cast<std::size_t>(end) > len) {
        ++rejected;
        continue;
      }
      const auto st = static_cast<std::size_t>(start), en = static_cast<std::size_t>(end);
      const auto actual = std::string(index.slice(text, st, en));
      if ((surface.empty() || surface == actual) && !overlaps(st, en)) {
        accepted.push_back({st, en, actual});
        continue;
      }
    }
    if (auto anchored = anchor(surface)) {
      accepted.push_back(std::move(*anchored));
    } else {
      ++rejected;
    }
  }
  std::sort(accepted.begin(), accepted.end(), [](const Span& a, const Span& b) { return a.start < b.start; });
  out.spans.spans = std::move(accepted);
  return out;
}

std::vector<ClassifyResult> LlmAnnotatorBackend::classify_batch(std::span<const ClassifyItem> items) {
  std::vector<ClassifyResult> out;
  for (const auto& item : items) {
    out.push_back(parse_classify_reply(chat_->complete({{"user", classify_prompt(item)}})));
  }
  return out;
}

std::vector<ExtractResult> LlmAnnotatorBackend::extract_batch(std::span<const ExtractItem> items) {
  std::vector<ExtractResult> out;
  for (const auto& item : items) {
    std::size_t rejected = 0;
    out.push_back(parse_extract_reply(chat_->complete({{"user", extract_prompt(item)}}), item.text, rejected));
    if (rejected > 0) count_dropped_spans(rejected);
  }
  return out;
}

// --- factory ---------------------------------------------------------------------

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

std::unique_ptr<Backend> make_backend(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string scheme(spec.substr(0, colon));
  std::string rest = colon == std::string_view::npos ? "" : std::string(spec.substr(colon + 1));

  if (scheme == "mock") {
    if (rest.empty()) throw Error(ErrorCode::InvalidArgument, "mock backend needs a rules file: mock:<rules.json>");
    return MockBackend::from_file(rest);
  }
  if (scheme == "proxy") {
    const auto url = rest.empty() ? env_or("FALCONER_PROXY_URL") : rest;
    if (url.empty()) throw Error(ErrorCode::InvalidArgument, "proxy backend needs a URL or FALCONER_PROXY_URL");
    BackendDescriptor d;
    d.id = "proxy:" + url;
    d.kind = BackendKind::HttpProxy;
    return std::make_unique<HttpProxyBackend>(url, d, env_or("FALCONER_API_KEY"));
  }
  if (scheme == "annotator") {
    std::string model = "gpt-4.1";
    if (const auto hash = rest.find('#'); hash != std::string::npos) {
      model = rest.substr(hash + 1);
      rest = rest.substr(0, hash);
    }
    const auto url = rest.empty() ? env_or("FALCONER_PLANNER_URL") : rest;
    if (url.empty()) throw Error(ErrorCode::InvalidArgument, "annotator backend needs a URL or FALCONER_PLANNER_URL");
    BackendDescriptor d;
    d.id = "annotator:" + url + "#" + model;
    auto chat = std::make_shared<OpenAiChatClient>(url, model, env_or("FALCONER_API_KEY"));
    return std::make_unique<LlmAnnotatorBackend>(std::move(chat), d);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown backend spec '" + std::string(spec) + "'");
}

}  // namespace falconer
