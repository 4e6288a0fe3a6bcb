#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "falconer/corpus.hpp"

namespace falconer {

/// Character span in Unicode scalar offsets, end exclusive.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool operator==(const Span&) const = default;
};

struct SpanSet {
  std::string record_id;
  std::vector<Span> spans;

  bool operator==(const SpanSet&) const = default;
};

enum class Bio : char { B = 'B', I = 'I', O = 'O' };
using BioSequence = std::vector<Bio>;

std::string_view to_string(Bio tag);
Bio bio_from_string(std::string_view tag);

/// Classification recast as entailment; the layout is frozen byte-for-byte.
struct NliPrompt {
  std::string rendered;
  std::string label;
  std::vector<std::string> choices{"yes", "no"};
};

NliPrompt render_nli_prompt(std::string_view text, std::string_view label);

enum class BioMode { Lenient, Strict };

/// One span per maximal B I* run. Lenient mode treats a stray I (after O or at
/// position 0) as B; strict mode throws MalformedBio at that position.
SpanSet decode_bio(const BioSequence& tags, const TokenSequence& tokens, std::string_view text,
                   BioMode mode = BioMode::Lenient);

/// Inverse of decode_bio for token-aligned, non-overlapping spans.
BioSequence encode_bio(const SpanSet& spans, const TokenSequence& tokens);

/// Widens each span to the smallest enclosing token boundaries and merges any
/// spans that overlap afterwards. Spans touching no token are dropped.
SpanSet snap_to_tokens(const SpanSet& spans, const TokenSequence& tokens, std::string_view text);

/// True if spans are sorted, non-overlapping, in bounds, and surfaces match text.
bool spans_valid(const std::vector<Span>& spans, std::string_view text);

/// Builds a span from scalar offsets, filling in the surface.
Span make_span(std::string_view text, std::size_t start, std::size_t end);

struct NteOptions {
  std::size_t min_len = 1;
  std::size_t max_len = 8;
};

struct NteExample {
  std::string context;
  TokenSequence continuation;
  BioSequence tags;
};

/// Next-tokens extraction labeling: the context is the text before token
/// `split`; continuation n-grams that already occur in the context are tagged.
NteExample nte_label(std::string_view text, std::size_t split, NteOptions options = {});

}  // namespace falconer
