#include "falconer/primitives.hpp"

#include <algorithm>
#include <unordered_set>

#include "falconer/error.hpp"
#include "falconer/text.hpp"

namespace falconer {

std::string_view to_string(Bio tag) {
  switch (tag) {
    case Bio::B: return "B";
    case Bio::I: return "I";
    case Bio::O: return "O";
  }
  return "O";
}

Bio bio_from_string(std::string_view tag) {
  if (tag == "B") return Bio::B;
  if (tag == "I") return Bio::I;
  if (tag == "O") return Bio::O;
  throw Error(ErrorCode::InvalidArgument, "bad BIO tag '" + std::string(tag) + "'");
}

NliPrompt render_nli_prompt(std::string_view text, std::string_view label) {
  if (label.empty()) throw Error(ErrorCode::EmptyLabel, "label must be non-empty");
  NliPrompt prompt;
  prompt.label = std::string(label);
  prompt.rendered.reserve(text.size() + label.size() + 128);
  prompt.rendered += "User:\nChoices:\nyes\nno\n";
  prompt.rendered += text;
  prompt.rendered += " Question: Based on above sentence, is the following sentence true or not ?\nThis text is about ";
  prompt.rendered += label;
  prompt.rendered += "\nAssistant:\nAnswer:";
  return prompt;
}

Span make_span(std::string_view text, std::size_t start, std::size_t end) {
  const text::ScalarIndex index(text);
  return {start, end, std::string(index.slice(text, start, end))};
}

SpanSet decode_bio(const BioSequence& tags, const TokenSequence& tokens, std::string_view text,
                   BioMode mode) {
  if (tags.size() != tokens.size()) {
    throw Error(ErrorCode::InvalidArgument, "tag count " + std::to_string(tags.size()) +
                                                " != token count " + std::to_string(tokens.size()));
  }
  const text::ScalarIndex index(text);
  SpanSet out;
  std::size_t run_first = 0;
  bool open = false;

  auto close = [&](std::size_t last) {
    const auto s = tokens[run_first].start;
    const auto e = tokens[last].end;
    out.spans.push_back({s, e, std::string(index.slice(text, s, e))});
    open = false;
  };

  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Bio::O:
        if (open) close(i - 1);
        break;
      case Bio::B:
        if (open) close(i - 1);
        run_first = i;
        open = true;
        break;
      case Bio::I:
        if (!open) {
          if (mode == BioMode::Strict) {
            throw PositionalError(ErrorCode::MalformedBio, i,
                                  "I tag without preceding B at position " + std::to_string(i));
          }
          run_first = i;
          open = true;
        }
        break;
    }
  }
  if (open) close(tags.size() - 1);
  return out;
}

BioSequence encode_bio(const SpanSet& spans, const TokenSequence& tokens) {
  BioSequence tags(tokens.size(), Bio::O);
  std::vector<const Span*> sorted;
  sorted.reserve(spans.spans.size());
  for (const auto& s : spans.spans) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const Span* a, const Span* b) { return a->start < b->start; });

  std::size_t prev_end = 0;
  bool have_prev = false;
  for (const Span* span : sorted) {
    if (have_prev && span->start < prev_end) {
      throw Error(ErrorCode::OverlappingSpans,
                  "span [" + std::to_string(span->start) + "," + std::to_string(span->end) + ") overlaps");
    }
    auto first = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.start == span->start; });
    auto last = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.end == span->end; });
    if (span->start >= span->end || first == tokens.end() || last == tokens.end() || last < first) {
      throw Error(ErrorCode::UnalignedSpan, "span [" + std::to_string(span->start) + "," +
                                                std::to_string(span->end) + ") \"" + span->surface +
                                                "\" does not align with token boundaries");
    }
    const auto b = static_cast<std::size_t>(first - tokens.begin());
    const auto e = static_cast<std::size_t>(last - tokens.begin());
    tags[b] = Bio::B;
    for (auto i = b + 1; i <= e; ++i) tags[i] = Bio::I;
    prev_end = span->end;
    have_prev = true;
  }
  return tags;
}

SpanSet snap_to_tokens(const SpanSet& spans, const TokenSequence& tokens, std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& span : spans.spans) {
    std::size_t s = 0, e = 0;
    bool hit = false;
    for (const auto& tok : tokens) {
      if (tok.start < span.end && tok.end > span.start) {
        if (!hit) s = tok.start;
        e = tok.end;
        hit = true;
      }
    }
    if (hit) ranges.emplace_back(s, e);
  }
  std::sort(ranges.begin(), ranges.end());

  const text::ScalarIndex index(text);
  SpanSet out;
  out.record_id = spans.record_id;
  for (const auto& [s, e] : ranges) {
    if (!out.spans.empty() && s < out.spans.back().end) {
      auto& back = out.spans.back();
      back.end = std::max(back.end, e);
      back.surface = std::string(index.slice(text, back.start, back.end));
      continue;
    }
    out.spans.push_back({s, e, std::string(index.slice(text, s, e))});
  }
  return out;
}

bool spans_valid(const std::vector<Span>& spans, std::string_view text) {
  const text::ScalarIndex index(text);
  std::size_t prev_end = 0;
  for (const auto& span : spans) {
    if (span.start >= span.end || span.end > index.size() || span.start < prev_end) return false;
    if (index.slice(text, span.start, span.end) != span.surface) return false;
    prev_end = span.end;
  }
  return true;
}

namespace {

bool punctuation_only(const Token& tok) {
  const auto scalars = text::decode(tok.surface);
  return std::all_of(scalars.begin(), scalars.end(), text::is_punctuation);
}

std::string ngram_key(const TokenSequence& tokens, std::size_t first, std::size_t n) {
  std::string key;
  for (std::size_t i = first; i < first + n; ++i) {
    key += tokens[i].surface;
    key.push_back('\x1f');
  }
  return key;
}

}  // namespace

NteExample nte_label(std::string_view text, std::size_t split, NteOptions options) {
  if (options.min_len < 1 || options.min_len > options.max_len) {
    throw Error(ErrorCode::InvalidArgument, "need 1 <= min_len <= max_len");
  }
  const auto tokens = tokenize(text);
  if (split == 0 || split >= tokens.size()) {
    throw Error(ErrorCode::BadSplit,
                "split " + std::to_string(split) + " not in (0, " + std::to_string(tokens.size()) + ")");
  }

  // Every context n-gram of admissible length, keyed by its token surfaces.
  std::unordered_set<std::string> seen;
  for (std::size_t n = options.min_len; n <= options.max_len; ++n) {
    for (std::size_t i = 0; i + n <= split; ++i) seen.insert(ngram_key(tokens, i, n));
  }

  NteExample out;
  const text::ScalarIndex index(text);
  out.context = std::string(index.slice(text, 0, tokens[split].start));
  out.continuation.assign(tokens.begin() + static_cast<std::ptrdiff_t>(split), tokens.end());
  const auto& cont = out.continuation;
  std::vector<bool> punct(cont.size());
  for (std::size_t i = 0; i < cont.size(); ++i) punct[i] = punctuation_only(cont[i]);

  out.tags.assign(cont.size(), Bio::O);
  std::size_t i = 0;
  while (i < cont.size()) {
    std::size_t best = 0;
    if (!punct[i]) {
      const std::size_t longest = std::min(options.max_len, cont.size() - i);
      for (std::size_t n = longest; n >= options.min_len && n > 0; --n) {
        // A match may contain punctuation but must not begin or end with it.
        if (punct[i + n - 1]) continue;
        if (seen.contains(ngram_key(cont, i, n))) {
          best = n;
          break;
        }
      }
    }
    if (best == 0) {
      ++i;
      continue;
    }
    out.tags[i] = Bio::B;
    for (std::size_t k = 1; k < best; ++k) out.tags[i + k] = Bio::I;
    i += best;
  }
  return out;
}

}  // namespace falconer
