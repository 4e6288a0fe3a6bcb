#include "falconer/generator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "falconer/digest.hpp"
#include "falconer/error.hpp"
#include "falconer/random.hpp"

namespace falconer {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(TrainingKind kind) {
  return kind == TrainingKind::Classification ? "classification" : "extraction";
}

std::string dataset_file_name(TrainingKind kind) { return std::string(to_string(kind)) + ".jsonl"; }

TrainingSet generate_classification_set(const Corpus& corpus, const std::string& label, std::size_t n, Backend& scorer,
                                        const DispatchOptions& options) {
  if (label.empty()) throw Error(ErrorCode::EmptyLabel, "classification label is empty");
  if (2 * n > corpus.size()) {
    throw Error(ErrorCode::CorpusTooSmall,
                "need " + std::to_string(2 * n) + " records, corpus has " + std::to_string(corpus.size()));
  }

  std::vector<ClassifyItem> items;
  items.reserve(corpus.size());
  for (const auto& r : corpus.records) items.push_back({r.text, label});
  const auto results = scorer.classify(items, options);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return results[a].score > results[b].score; });

  std::vector<std::size_t> positives(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<std::size_t> negatives(order.end() - static_cast<std::ptrdiff_t>(n), order.end());
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());

  TrainingSet set;
  set.kind = TrainingKind::Classification;
  set.label_or_instruction = label;
  set.provenance.annotator = scorer.descriptor().id;
  auto add = [&](std::size_t i, Answer answer) {
    set.classification.push_back({corpus.records[i].id, corpus.records[i].text, answer, results[i].score});
  };
  for (auto i : positives) add(i, Answer::Yes);
  for (auto i : negatives) add(i, Answer::No);

  if (!results.empty()) {
    const auto [lo, hi] = std::minmax_element(results.begin(), results.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    if (lo->score == hi->score) set.provenance.notes.push_back("warning: zero score variance, ties kept in corpus order");
  }
  return set;
}

std::pair<std::size_t, std::size_t> token_range(const Span& span, const TokenSequence& tokens) {
  std::size_t first = tokens.size(), last = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].start < span.end && tokens[i].end > span.start) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == tokens.size()) throw Error(ErrorCode::UnalignedSpan, "span covers no token");
  return {first, last};
}

TrainingSet generate_extraction_set(const Corpus& corpus, const std::string& instruction, std::size_t n,
                                    std::uint64_t seed, Backend& annotator, const DispatchOptions& options) {
  if (instruction.empty()) throw Error(ErrorCode::EmptyInstruction, "extraction instruction is empty");
  const auto sample = sample_count(corpus, n, seed);

  std::vector<ExtractItem> items;
  items.reserve(sample.size());
  for (const auto& r : sample.records) items.push_back({r.text, instruction});
  const auto results = annotator.extract(items, options);

  TrainingSet set;
  set.kind = TrainingKind::Extraction;
  set.label_or_instruction = instruction;
  set.provenance.annotator = annotator.descriptor().id;
  set.provenance.seed = seed;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& rec = sample.records[i];
    const auto tokens = tokenize(rec.text);
    auto spans = snap_to_tokens(results[i].spans, tokens, rec.text);
    spans.record_id = rec.id;
    auto bio = encode_bio(spans, tokens);
    set.extraction.push_back({rec.id, rec.text, std::move(spans), std::move(bio)});
  }
  return set;
}

TrainingSet degrade_spans(const TrainingSet& set, std::uint64_t seed) {
  if (set.kind != TrainingKind::Extraction) throw Error(ErrorCode::WrongKind, "degrade_spans needs an extraction set");

  TrainingSet out = set;
  for (auto& ex : out.extraction) {
    const auto tokens = tokenize(ex.text);
    std::vector<Span> spans;
    std::optional<std::size_t> prev_last;
    for (std::size_t k = 0; k < ex.spans.spans.size(); ++k) {
      const auto [first, last] = token_range(ex.spans.spans[k], tokens);
      Rng rng(derive_seed(seed, ex.record_id, k));
      std::size_t start = rng.between(0, last);
      if (prev_last && start <= *prev_last) start = *prev_last + 1;
      spans.push_back(make_span(ex.text, tokens[start].start, tokens[last].end));
      prev_last = last;
    }
    ex.spans.spans = std::move(spans);
    ex.bio = encode_bio(ex.spans, tokens);
  }
  out.provenance.notes.push_back("degraded, seed=" + std::to_string(seed));
  return out;
}

namespace {

json provenance_json(const TrainingProvenance& p) {
  return {{"annotator", p.annotator},
          {"plan_id", p.plan_id},
          {"tokenizer", p.tokenizer},
          {"seed", p.seed ? json(*p.seed) : json(nullptr)},
          {"notes", p.notes}};
}

TrainingProvenance provenance_from_json(const json& j) {
  TrainingProvenance p;
  p.annotator = j.at("annotator").get<std::string>();
  p.plan_id = j.at("plan_id").get<std::string>();
  p.tokenizer = j.at("tokenizer").get<std::string>();
  if (!j.at("seed").is_null()) p.seed = j.at("seed").get<std::uint64_t>();
  p.notes = j.at("notes").get<std::vector<std::string>>();
  return p;
}

json bio_json(const BioSequence& bio) {
  json out = json::array();
  for (auto t : bio) out.push_back(std::string(to_string(t)));
  return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json emit_dataset(const TrainingSet& set, const fs::path& dir) {
  std::string body;
  json counts = {{"examples", set.size()}};
  if (set.kind == TrainingKind::Classification) {
    std::size_t yes = 0;
    for (const auto& ex : set.classification) {
      yes += ex.answer == Answer::Yes;
      const json line = {{"id", ex.record_id},
                         {"text", ex.text},
                         {"label", set.label_or_instruction},
                         {"answer", std::string(to_string(ex.answer))},
                         {"score", ex.score},
                         {"prompt", render_nli_prompt(ex.text, set.label_or_instruction).rendered}};
      body += line.dump() + "\n";
    }
    counts["yes"] = yes;
    counts["no"] = set.size() - yes;
  } else {
    std::size_t spans = 0;
    for (const auto& ex : set.extraction) {
      spans += ex.spans.spans.size();
      json tokens = json::array();
      for (const auto& t : tokenize(ex.text)) tokens.push_back(t.surface);
      const json line = {{"id", ex.record_id},
                         {"text", ex.text},
                         {"instruction", set.label_or_instruction},
                         {"spans", to_json(ex.spans.spans)},
                         {"bio", bio_json(ex.bio)},
                         {"tokens", tokens}};
      body += line.dump() + "\n";
    }
    counts["spans"] = spans;
  }

  const auto file = dataset_file_name(set.kind);
  const json manifest = {{"schema", std::string(kDatasetSchema)},
                         {"kind", std::string(to_string(set.kind))},
                         {"label_or_instruction", set.label_or_instruction},
                         {"counts", counts},
                         {"provenance", provenance_json(set.provenance)},
                         {"tokenizer", set.provenance.tokenizer},
                         {"file", file},
                         {"digest", sha256_hex(body)}};

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / file, body);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

TrainingSet load_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw SchemaError("/manifest.json", e.what());
  }
  if (manifest.value("schema", "") != kDatasetSchema) throw SchemaError("/schema", "unsupported dataset schema");

  TrainingSet set;
  const auto kind = manifest.at("kind").get<std::string>();
  if (kind == "classification") set.kind = TrainingKind::Classification;
  else if (kind == "extraction") set.kind = TrainingKind::Extraction;
  else throw SchemaError("/kind", "unknown dataset kind");
  set.label_or_instruction = manifest.at("label_or_instruction").get<std::string>();
  set.provenance = provenance_from_json(manifest.at("provenance"));

  const auto body = read_file(dir / dataset_file_name(set.kind));
  if (sha256_hex(body) != manifest.at("digest").get<std::string>()) {
    throw Error(ErrorCode::IoError, "dataset digest mismatch in " + dir.string());
  }
  std::istringstream lines(body);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (set.kind == TrainingKind::Classification) {
        const auto answer = j.at("answer").get<std::string>() == "yes" ? Answer::Yes : Answer::No;
        set.classification.push_back(
            {j.at("id").get<std::string>(), j.at("text").get<std::string>(), answer, j.at("score").get<double>()});
      } else {
        ExtractionExample ex;
        ex.record_id = j.at("id").get<std::string>();
        ex.text = j.at("text").get<std::string>();
        ex.spans.record_id = ex.record_id;
        ex.spans.spans = spans_from_json(j.at("spans"));
        for (const auto& t : j.at("bio")) ex.bio.push_back(bio_from_string(t.get<std::string>()));
        set.extraction.push_back(std::move(ex));
      }
    } catch (const json::exception&) {
      throw MalformedLine(line_no, "invalid dataset line");
    }
  }
  return set;
}

}  // namespace falconer
