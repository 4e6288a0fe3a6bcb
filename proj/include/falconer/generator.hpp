#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "falconer/backends.hpp"
#include "falconer/corpus.hpp"
#include "falconer/primitives.hpp"

namespace falconer {

inline constexpr std::string_view kDatasetSchema = "ds-v1";

enum class TrainingKind { Classification, Extraction };
std::string_view to_string(TrainingKind kind);

struct ClassificationExample {
  std::string record_id;
  std::string text;
  Answer answer = Answer::No;
  double score = 0.0;

  bool operator==(const ClassificationExample&) const = default;
};

struct ExtractionExample {
  std::string record_id;
  std::string text;
  SpanSet spans;
  BioSequence bio;

  bool operator==(const ExtractionExample&) const = default;
};

struct TrainingProvenance {
  std::string annotator;
  std::string plan_id;
  std::string tokenizer{kTokenizerVersion};
  std::optional<std::uint64_t> seed;
  std::vector<std::string> notes;

  bool operator==(const TrainingProvenance&) const = default;
};

struct TrainingSet {
  TrainingKind kind = TrainingKind::Classification;
  std::string label_or_instruction;
  std::vector<ClassificationExample> classification;
  std::vector<ExtractionExample> extraction;
  TrainingProvenance provenance;

  std::size_t size() const { return kind == TrainingKind::Classification ? classification.size() : extraction.size(); }
  bool operator==(const TrainingSet&) const = default;
};

/// Scores every record, takes the top n as positives and the bottom n as
/// negatives. Ties keep corpus order. Output: positives, then negatives, each
/// in corpus order.
TrainingSet generate_classification_set(const Corpus& corpus, const std::string& label, std::size_t n, Backend& scorer,
                                        const DispatchOptions& options = {});

/// Annotates n records sampled with sample_count(corpus, n, seed). Spans are
/// snapped outward to token boundaries before BIO encoding.
TrainingSet generate_extraction_set(const Corpus& corpus, const std::string& instruction, std::size_t n,
                                    std::uint64_t seed, Backend& annotator, const DispatchOptions& options = {});

/// Redraws every span's start token uniformly from [0, end] keeping the end
/// token. A start that would reach into the previous span is clipped to the
/// token after it, so span ends and span counts never change.
TrainingSet degrade_spans(const TrainingSet& set, std::uint64_t seed);

/// Token index range [first, last] of a token-aligned span.
std::pair<std::size_t, std::size_t> token_range(const Span& span, const TokenSequence& tokens);

/// Writes classification.jsonl or extraction.jsonl plus manifest.json and
/// returns the manifest. Output bytes depend only on the set.
nlohmann::json emit_dataset(const TrainingSet& set, const std::filesystem::path& dir);

TrainingSet load_dataset(const std::filesystem::path& dir);

std::string dataset_file_name(TrainingKind kind);

}  // namespace falconer
