#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "falconer/backends.hpp"
#include "falconer/corpus.hpp"
#include "falconer/plan.hpp"

namespace falconer {

struct ExecuteOptions {
  std::size_t batch = 0;  // 0: use each backend's max_batch
  std::size_t parallel = 1;
  bool cache = false;
  /// Abort on the first failed item instead of dropping its record.
  bool strict = false;
};

/// Which backend serves each primitive node kind. Not owned.
struct BackendBindings {
  Backend* label = nullptr;
  Backend* span = nullptr;
};

/// Output field value: Records nodes yield the text, Label/Bool a boolean,
/// Span a SpanSet.
using FieldValue = std::variant<bool, SpanSet, std::string>;

struct ResultRow {
  std::string record_id;
  std::map<std::string, FieldValue> fields;

  bool operator==(const ResultRow&) const = default;
};

struct ResultSet {
  std::string plan_id;
  std::vector<ResultRow> rows;                      // corpus order
  std::vector<std::string> dropped;                 // corpus order
  std::map<std::string, std::string> drop_reasons;  // record id -> reason

  bool operator==(const ResultSet&) const = default;
};

struct BackendCost {
  std::string backend_id;
  std::uint64_t wire_calls = 0;
  std::uint64_t items_sent = 0;
  std::uint64_t chars_sent = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t invalid_spans_dropped = 0;
  std::uint64_t failed_items = 0;
  double estimated_cost = 0.0;
  std::chrono::nanoseconds wall_time{0};
};

struct CostReport {
  std::string plan_id;
  std::vector<BackendCost> backends;  // sorted by backend id
  BackendCost totals;

  /// Wall time is left out when `include_wall_time` is false so that
  /// measured runs serialize deterministically.
  nlohmann::json to_json(bool include_wall_time = true) const;
};

/// Evaluates a validated plan over the corpus, node by node in topological
/// order, batching every primitive node over its surviving record set.
std::pair<ResultSet, CostReport> execute(const Plan& plan, const Corpus& corpus, const BackendBindings& bindings,
                                         const ExecuteOptions& options = {});

struct SpeedupRatio {
  double time = 1.0;
  double cost = 1.0;
};

/// (b.wall_time / a.wall_time, b.cost / a.cost): how much cheaper run `a` is.
SpeedupRatio speedup_ratio(const CostReport& a, const CostReport& b);

nlohmann::json to_json(const FieldValue& value);
FieldValue field_value_from_json(const nlohmann::json& j);

/// results.jsonl: one row per surviving record, then a trailing summary
/// object {"_dropped": [...], "_cost": {...}, "_plan_id": "..."}.
std::string serialize_results(const ResultSet& results, const CostReport& cost);
ResultSet parse_results(std::string_view jsonl);

}  // namespace falconer
