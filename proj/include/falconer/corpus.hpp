#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace falconer {

/// Frozen tokenizer version, recorded in every emitted dataset and report.
inline constexpr std::string_view kTokenizerVersion = "tok-v1";

struct CorpusRecord {
  std::string id;
  std::string text;
  std::map<std::string, std::string> meta;
};

/// Token with Unicode scalar offsets [start, end) into the source text.
struct Token {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

using TokenSequence = std::vector<Token>;

struct Corpus {
  std::vector<CorpusRecord> records;
  std::string source;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

/// Reads a JSONL corpus. Lines without an "id" get "rec-NNNNNN" from their
/// zero-based line index; blank lines are skipped.
Corpus load_corpus(const std::filesystem::path& path);

/// Same as load_corpus, over in-memory JSONL.
Corpus parse_corpus(std::string_view jsonl, std::string source = "<memory>");

/// Builds a corpus from bare texts with auto-assigned ids.
Corpus make_corpus(const std::vector<std::string>& texts, std::string source = "<memory>");

/// tok-v1: split on whitespace runs, then peel the leading and trailing
/// punctuation run of each chunk into its own token.
TokenSequence tokenize(std::string_view text);

/// ceil(fraction * |corpus|) records, uniformly without replacement, in corpus order.
Corpus sample_fraction(const Corpus& corpus, double fraction, std::uint64_t seed);

/// Exactly n records with the same sampling discipline as sample_fraction.
Corpus sample_count(const Corpus& corpus, std::size_t n, std::uint64_t seed);

std::string auto_record_id(std::size_t line_index);

}  // namespace falconer
