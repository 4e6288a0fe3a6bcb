#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "falconer/corpus.hpp"
#include "falconer/executor.hpp"
#include "falconer/primitives.hpp"

namespace falconer {

struct TaskScore {
  std::string name;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::uint64_t gold_tokens = 0;
  std::uint64_t pred_tokens = 0;
  std::uint64_t matched_tokens = 0;
  /// Boolean agreement, where the task has one.
  std::optional<double> accuracy;
  std::uint64_t accuracy_total = 0;
  std::optional<double> jaccard;

  bool operator==(const TaskScore&) const = default;
};

struct EvalReport {
  std::vector<TaskScore> tasks;  // sorted by name
  TaskScore overall;
  std::string tokenizer{kTokenizerVersion};
  std::string matching = "lowercase-token-multiset";

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);

  const TaskScore* task(std::string_view name) const;
  bool operator==(const EvalReport&) const = default;
};

struct TokenCounts {
  std::uint64_t gold = 0;
  std::uint64_t pred = 0;
  std::uint64_t matched = 0;
};

/// P, R, F1 from micro-aggregated counts. 0/0 precision or recall is 1;
/// both totals zero gives F1 = 1.
TaskScore score_counts(std::string name, const TokenCounts& counts);

/// Word-level micro F1. Each span contributes the lowercased surfaces of the
/// tok-v1 tokens it overlaps; matches are multiset intersections per record.
EvalReport word_f1(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold, const Corpus& corpus);

/// Token counts behind word_f1, without building a report.
TokenCounts word_counts(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold, const Corpus& corpus);

/// Agreement of run_a against run_b (treated as gold). Tasks:
///   "_surviving"   survival accuracy over the corpus and the Jaccard of the surviving sets;
///   <bool field>   accuracy over the union of surviving records, absent = false;
///   <span field>   word_f1 over records surviving in both runs.
/// overall.accuracy pools the boolean fields, or is the survival accuracy
/// when the output has none.
EvalReport consistency(const ResultSet& run_a, const ResultSet& run_b, const Corpus& corpus);

enum class ReportFormat { Json, Markdown };

/// JSON is canonical (sorted keys); markdown rounds to 3 decimals, half-even.
std::string render_report(const EvalReport& report, ReportFormat format);

/// Round-half-even to 3 decimals, formatted "0.667".
std::string format_3dp(double value);

}  // namespace falconer
