#include "falconer/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "falconer/error.hpp"
#include "falconer/random.hpp"
#include "falconer/text.hpp"

namespace falconer {

using nlohmann::json;

std::string auto_record_id(std::size_t line_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec-%06zu", line_index);
  return buf;
}

Corpus parse_corpus(std::string_view jsonl, std::string source) {
  Corpus corpus;
  corpus.source = std::move(source);
  std::unordered_set<std::string> seen;

  std::size_t line_index = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto eol = jsonl.find('\n', pos);
    if (eol == std::string_view::npos) eol = jsonl.size();
    std::string_view line = jsonl.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    const std::size_t index = line_index++;
    const std::size_t line_no = index + 1;

    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedLine(line_no, e.what());
    }
    if (!obj.is_object()) throw MalformedLine(line_no, "not a JSON object");
    const auto text_it = obj.find("text");
    if (text_it == obj.end() || !text_it->is_string()) throw MalformedLine(line_no, "missing string field \"text\"");

    CorpusRecord rec;
    rec.text = text_it->get<std::string>();
    if (const auto id_it = obj.find("id"); id_it != obj.end()) {
      if (!id_it->is_string() || id_it->get_ref<const std::string&>().empty()) {
        throw MalformedLine(line_no, "\"id\" must be a non-empty string");
      }
      rec.id = id_it->get<std::string>();
    } else {
      rec.id = auto_record_id(index);
    }
    if (const auto meta_it = obj.find("meta"); meta_it != obj.end() && !meta_it->is_null()) {
      if (!meta_it->is_object()) throw MalformedLine(line_no, "\"meta\" must be an object");
      for (const auto& [k, v] : meta_it->items()) {
        if (!v.is_string()) throw MalformedLine(line_no, "meta value for \"" + k + "\" is not a string");
        rec.meta.emplace(k, v.get<std::string>());
      }
    }
    if (!seen.insert(rec.id).second) throw Error(ErrorCode::DuplicateId, rec.id);
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty()) throw Error(ErrorCode::EmptyCorpus, corpus.source);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path.string());
}

Corpus make_corpus(const std::vector<std::string>& texts, std::string source) {
  Corpus corpus;
  corpus.source = std::move(source);
  corpus.records.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    corpus.records.push_back({auto_record_id(i), texts[i], {}});
  }
  return corpus;
}

TokenSequence tokenize(std::string_view text) {
  const auto scalars = text::decode(text);
  const text::ScalarIndex index(text);
  TokenSequence out;

  auto emit = [&](std::size_t s, std::size_t e) {
    if (s < e) out.push_back({std::string(index.slice(text, s, e)), s, e});
  };

  std::size_t i = 0;
  const std::size_t n = scalars.size();
  while (i < n) {
    while (i < n && text::is_whitespace(scalars[i])) ++i;
    if (i == n) break;
    const std::size_t chunk_start = i;
    while (i < n && !text::is_whitespace(scalars[i])) ++i;
    const std::size_t chunk_end = i;

    std::size_t lead_end = chunk_start;
    while (lead_end < chunk_end && text::is_punctuation(scalars[lead_end])) ++lead_end;
    std::size_t trail_start = chunk_end;
    while (trail_start > lead_end && text::is_punctuation(scalars[trail_start - 1])) --trail_start;

    emit(chunk_start, lead_end);
    emit(lead_end, trail_start);
    emit(trail_start, chunk_end);
  }
  return out;
}

Corpus sample_count(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, corpus.source);
  if (n > corpus.size()) {
    throw Error(ErrorCode::SampleTooLarge, std::to_string(n) + " > " + std::to_string(corpus.size()));
  }
  Corpus out;
  out.source = corpus.source;
  for (auto i : sample_indices(corpus.size(), n, seed)) out.records.push_back(corpus.records[i]);
  return out;
}

Corpus sample_fraction(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidFraction, std::to_string(fraction));
  }
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, corpus.source);
  // Products like 0.07 * 100 land a hair above the integer; don't round those up.
  const double exact = fraction * static_cast<double>(corpus.size());
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  k = std::clamp<std::size_t>(k, 1, corpus.size());
  return sample_count(corpus, k, seed);
}

}  // namespace falconer
