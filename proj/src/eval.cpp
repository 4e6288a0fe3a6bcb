#include "falconer/eval.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "falconer/error.hpp"
#include "falconer/text.hpp"

namespace falconer {

using nlohmann::json;

namespace {

using Multiset = std::map<std::string, std::uint64_t>;

Multiset covered_tokens(const std::vector<Span>& spans, const TokenSequence& tokens) {
  Multiset out;
  for (const auto& span : spans) {
    for (const auto& tok : tokens) {
      if (tok.start < span.end && tok.end > span.start) ++out[text::lowercase(tok.surface)];
    }
  }
  return out;
}

std::uint64_t total(const Multiset& m) {
  std::uint64_t n = 0;
  for (const auto& [k, c] : m) n += c;
  return n;
}

std::uint64_t intersection(const Multiset& a, const Multiset& b) {
  std::uint64_t n = 0;
  for (const auto& [k, c] : a) {
    if (const auto it = b.find(k); it != b.end()) n += std::min(c, it->second);
  }
  return n;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json task_json(const TaskScore& t) {
  return {{"name", t.name},
          {"micro_precision", t.precision},
          {"micro_recall", t.recall},
          {"micro_f1", t.f1},
          {"support", {{"gold_tokens", t.gold_tokens}, {"pred_tokens", t.pred_tokens}, {"matched_tokens", t.matched_tokens}}},
          {"accuracy", opt(t.accuracy)},
          {"accuracy_total", t.accuracy_total},
          {"jaccard", opt(t.jaccard)}};
}

TaskScore task_from_json(const json& j) {
  TaskScore t;
  t.name = j.at("name").get<std::string>();
  t.precision = j.at("micro_precision").get<double>();
  t.recall = j.at("micro_recall").get<double>();
  t.f1 = j.at("micro_f1").get<double>();
  t.gold_tokens = j.at("support").at("gold_tokens").get<std::uint64_t>();
  t.pred_tokens = j.at("support").at("pred_tokens").get<std::uint64_t>();
  t.matched_tokens = j.at("support").at("matched_tokens").get<std::uint64_t>();
  if (!j.at("accuracy").is_null()) t.accuracy = j.at("accuracy").get<double>();
  t.accuracy_total = j.value("accuracy_total", std::uint64_t{0});
  if (!j.at("jaccard").is_null()) t.jaccard = j.at("jaccard").get<double>();
  return t;
}

}  // namespace

json EvalReport::to_json() const {
  json ts = json::array();
  for (const auto& t : tasks) ts.push_back(task_json(t));
  return {{"tasks", ts}, {"overall", task_json(overall)}, {"tokenizer", tokenizer}, {"matching", matching}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  for (const auto& t : j.at("tasks")) r.tasks.push_back(task_from_json(t));
  r.overall = task_from_json(j.at("overall"));
  r.tokenizer = j.at("tokenizer").get<std::string>();
  r.matching = j.at("matching").get<std::string>();
  return r;
}

const TaskScore* EvalReport::task(std::string_view name) const {
  for (const auto& t : tasks) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

TaskScore score_counts(std::string name, const TokenCounts& c) {
  TaskScore t;
  t.name = std::move(name);
  t.gold_tokens = c.gold;
  t.pred_tokens = c.pred;
  t.matched_tokens = c.matched;
  t.precision = c.pred == 0 ? 1.0 : static_cast<double>(c.matched) / static_cast<double>(c.pred);
  t.recall = c.gold == 0 ? 1.0 : static_cast<double>(c.matched) / static_cast<double>(c.gold);
  if (c.gold == 0 && c.pred == 0) t.f1 = 1.0;
  else if (c.matched == 0) t.f1 = 0.0;
  else t.f1 = 2.0 * t.precision * t.recall / (t.precision + t.recall);
  return t;
}

TokenCounts word_counts(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold, const Corpus& corpus) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus.records[i].id, i);

  // Spans grouped per corpus record, so sets split across entries still count once.
  std::map<std::size_t, std::pair<std::vector<Span>, std::vector<Span>>> by_record;
  auto collect = [&](const std::vector<SpanSet>& sets, bool is_pred) {
    for (const auto& s : sets) {
      const auto it = index.find(s.record_id);
      if (it == index.end()) throw Error(ErrorCode::UnknownRecord, s.record_id);
      auto& slot = is_pred ? by_record[it->second].first : by_record[it->second].second;
      slot.insert(slot.end(), s.spans.begin(), s.spans.end());
    }
  };
  collect(pred, true);
  collect(gold, false);

  TokenCounts counts;
  for (const auto& [i, pg] : by_record) {
    const auto tokens = tokenize(corpus.records[i].text);
    const auto p = covered_tokens(pg.first, tokens);
    const auto g = covered_tokens(pg.second, tokens);
    counts.pred += total(p);
    counts.gold += total(g);
    counts.matched += intersection(p, g);
  }
  return counts;
}

EvalReport word_f1(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold, const Corpus& corpus) {
  EvalReport report;
  const auto t = score_counts("spans", word_counts(pred, gold, corpus));
  report.tasks.push_back(t);
  report.overall = t;
  report.overall.name = "overall";
  return report;
}

EvalReport consistency(const ResultSet& run_a, const ResultSet& run_b, const Corpus& corpus) {
  if (run_a.plan_id != run_b.plan_id) throw Error(ErrorCode::PlanMismatch, run_a.plan_id + " vs " + run_b.plan_id);

  std::unordered_map<std::string, const ResultRow*> rows_a, rows_b;
  for (const auto& r : run_a.rows) rows_a.emplace(r.record_id, &r);
  for (const auto& r : run_b.rows) rows_b.emplace(r.record_id, &r);

  // Field kinds as observed in either run.
  std::map<std::string, std::size_t> field_kind;
  for (const auto* run : {&run_a, &run_b}) {
    for (const auto& r : run->rows) {
      for (const auto& [name, v] : r.fields) field_kind.emplace(name, v.index());
    }
  }

  EvalReport report;
  std::uint64_t survive_agree = 0, both = 0, either = 0;
  for (const auto& rec : corpus.records) {
    const bool a = rows_a.contains(rec.id), b = rows_b.contains(rec.id);
    survive_agree += a == b;
    both += a && b;
    either += a || b;
  }
  TaskScore survival;
  survival.name = "_surviving";
  survival.accuracy = corpus.empty() ? 1.0 : static_cast<double>(survive_agree) / static_cast<double>(corpus.size());
  survival.accuracy_total = corpus.size();
  survival.jaccard = either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
  report.tasks.push_back(survival);

  TokenCounts span_total;
  std::uint64_t bool_agree = 0, bool_total = 0;
  for (const auto& [name, kind] : field_kind) {
    if (kind == 0) {  // bool
      std::set<std::string> ids;
      for (const auto& [id, r] : rows_a) ids.insert(id);
      for (const auto& [id, r] : rows_b) ids.insert(id);
      auto value = [&](const auto& rows, const std::string& id) {
        const auto it = rows.find(id);
        if (it == rows.end()) return false;
        const auto f = it->second->fields.find(name);
        return f != it->second->fields.end() && std::get<bool>(f->second);
      };
      std::uint64_t agree = 0;
      for (const auto& id : ids) agree += value(rows_a, id) == value(rows_b, id);
      TaskScore t;
      t.name = name;
      t.accuracy = ids.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(ids.size());
      t.accuracy_total = ids.size();
      bool_agree += agree;
      bool_total += ids.size();
      report.tasks.push_back(t);
    } else if (kind == 1) {  // SpanSet
      std::vector<SpanSet> pred, gold;
      for (const auto& [id, ra] : rows_a) {
        const auto rb = rows_b.find(id);
        if (rb == rows_b.end()) continue;
        auto get = [&](const ResultRow* r) {
          SpanSet s;
          if (const auto f = r->fields.find(name); f != r->fields.end()) s = std::get<SpanSet>(f->second);
          s.record_id = id;
          return s;
        };
        pred.push_back(get(ra));
        gold.push_back(get(rb->second));
      }
      const auto counts = word_counts(pred, gold, corpus);
      span_total.gold += counts.gold;
      span_total.pred += counts.pred;
      span_total.matched += counts.matched;
      report.tasks.push_back(score_counts(name, counts));
    }
  }
  std::sort(report.tasks.begin(), report.tasks.end(), [](const auto& x, const auto& y) { return x.name < y.name; });

  report.overall = score_counts("overall", span_total);
  if (bool_total > 0) {
    report.overall.accuracy = static_cast<double>(bool_agree) / static_cast<double>(bool_total);
    report.overall.accuracy_total = bool_total;
  } else {
    report.overall.accuracy = survival.accuracy;
    report.overall.accuracy_total = survival.accuracy_total;
  }
  report.overall.jaccard = survival.jaccard;
  return report;
}

std::string format_3dp(double value) {
  if (!std::isfinite(value)) return value > 0 ? "inf" : (value < 0 ? "-inf" : "nan");
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);  // ties to even
  const double scaled = std::nearbyint(value * 1000.0);
  std::fesetround(saved);
  auto milli = static_cast<long long>(scaled);
  std::string sign;
  if (milli < 0) {
    sign = "-";
    milli = -milli;
  }
  char frac[8];
  std::snprintf(frac, sizeof frac, "%03lld", milli % 1000);
  return sign + std::to_string(milli / 1000) + "." + frac;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) return report.to_json().dump();

  std::ostringstream out;
  out << "tokenizer: " << report.tokenizer << ", matching: " << report.matching << "\n\n";
  out << "| task | precision | recall | f1 | gold | pred | matched | accuracy | jaccard |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  auto row = [&](const TaskScore& t) {
    auto o = [](const std::optional<double>& v) { return v ? format_3dp(*v) : std::string("-"); };
    out << "| " << t.name << " | " << format_3dp(t.precision) << " | " << format_3dp(t.recall) << " | "
        << format_3dp(t.f1) << " | " << t.gold_tokens << " | " << t.pred_tokens << " | " << t.matched_tokens << " | "
        << o(t.accuracy) << " | " << o(t.jaccard) << " |\n";
  };
  for (const auto& t : report.tasks) row(t);
  row(report.overall);
  return out.str();
}

}  // namespace falconer
