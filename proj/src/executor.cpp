#include "falconer/executor.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_map>

#include "falconer/error.hpp"

namespace falconer {

using nlohmann::json;

namespace {

// Per-node column over the whole corpus; `present` marks records the node
// has a value for.
struct Column {
  ValueType type = ValueType::None;
  std::vector<char> present;
  std::vector<char> truth;
  std::vector<SpanSet> spans;
};

double ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

json cost_json(const BackendCost& c, bool wall) {
  json j{{"wire_calls", c.wire_calls},
         {"items_sent", c.items_sent},
         {"chars_sent", c.chars_sent},
         {"cache_hits", c.cache_hits},
         {"invalid_spans_dropped", c.invalid_spans_dropped},
         {"failed_items", c.failed_items},
         {"estimated_cost", c.estimated_cost}};
  if (wall) j["wall_time_s"] = std::chrono::duration<double>(c.wall_time).count();
  return j;
}

class Evaluator {
 public:
  Evaluator(const Plan& plan, const Corpus& corpus, const BackendBindings& bindings, const ExecuteOptions& options)
      : plan_(plan), corpus_(corpus), bindings_(bindings), options_(options), reasons_(corpus.size()) {}

  ResultSet run() {
    for (const auto& id : topological_order(plan_)) {
      const PlanNode& node = *plan_.find(id);
      columns_[id] = evaluate(node);
    }
    return assemble(*plan_.find(plan_.output));
  }

 private:
  std::size_t n() const { return corpus_.size(); }

  void note(std::size_t i, std::string reason) {
    if (reasons_[i].empty()) reasons_[i] = std::move(reason);
  }

  Column evaluate(const PlanNode& node) {
    switch (node.kind) {
      case NodeKind::Source: {
        Column c{ValueType::Records, std::vector<char>(n(), 1), {}, {}};
        return c;
      }
      case NodeKind::Label:
      case NodeKind::Span: return evaluate_primitive(node);
      case NodeKind::Bool: return evaluate_bool(node);
      case NodeKind::Filter: {
        const auto& input = columns_.at(node.input);
        const auto& pred = columns_.at(node.predicate);
        Column c{ValueType::Records, std::vector<char>(n(), 0), {}, {}};
        for (std::size_t i = 0; i < n(); ++i) {
          c.present[i] = input.present[i] && pred.present[i] && pred.truth[i];
          if (input.present[i] && pred.present[i] && !pred.truth[i]) note(i, "filtered:" + node.id);
        }
        return c;
      }
      case NodeKind::Output: return {};
    }
    return {};
  }

  Column evaluate_bool(const PlanNode& node) {
    Column c{ValueType::Boolean, std::vector<char>(n(), 1), std::vector<char>(n(), 0), {}};
    std::vector<const Column*> inputs;
    for (const auto& id : node.inputs) inputs.push_back(&columns_.at(id));
    for (std::size_t i = 0; i < n(); ++i) {
      bool all = true, any = false;
      for (const Column* in : inputs) {
        if (!in->present[i]) {
          c.present[i] = 0;
          break;
        }
        all = all && in->truth[i];
        any = any || in->truth[i];
      }
      if (!c.present[i]) continue;
      switch (node.op) {
        case BoolOp::And: c.truth[i] = all; break;
        case BoolOp::Or: c.truth[i] = any; break;
        case BoolOp::Not: c.truth[i] = !inputs.front()->truth[i]; break;
      }
    }
    return c;
  }

  Column evaluate_primitive(const PlanNode& node) {
    const bool is_label = node.kind == NodeKind::Label;
    Backend* backend = is_label ? bindings_.label : bindings_.span;
    if (backend == nullptr) {
      throw Error(ErrorCode::UnboundBackend, std::string("no backend bound for ") + std::string(to_string(node.kind)) +
                                                 " nodes (node " + node.id + ")");
    }
    const auto& input = columns_.at(node.input);
    Column c{is_label ? ValueType::Boolean : ValueType::SpanSet, std::vector<char>(n(), 0), {}, {}};
    if (is_label) c.truth.assign(n(), 0);
    else c.spans.resize(n());

    // Resolve template slots per record; a missing or empty binding drops the record.
    std::vector<std::size_t> rows;
    std::vector<std::string> instructions;
    for (std::size_t i = 0; i < n(); ++i) {
      if (!input.present[i]) continue;
      std::map<std::string, std::string> values;
      bool bound = true;
      for (const auto& [slot, ref] : node.instruction.bindings) {
        const auto& src = columns_.at(ref);
        if (!src.present[i] || src.spans[i].spans.empty()) {
          note(i, "empty_binding:" + node.id + ":" + slot);
          bound = false;
          break;
        }
        values.emplace(slot, src.spans[i].spans.front().surface);
      }
      if (!bound) continue;
      rows.push_back(i);
      instructions.push_back(node.instruction.render(values));
    }

    const DispatchOptions dispatch{options_.parallel, options_.cache, options_.batch};
    auto fail = [&](std::size_t i, const std::exception_ptr& error) {
      try {
        std::rethrow_exception(error);
      } catch (const Error& e) {
        if (options_.strict) throw Error(e.code(), "node " + node.id + ": " + e.detail());
        note(i, "backend_error:" + node.id + ": " + e.what());
      } catch (const std::exception& e) {
        if (options_.strict) throw Error(ErrorCode::BackendUnavailable, "node " + node.id + ": " + e.what());
        note(i, "backend_error:" + node.id + ": " + e.what());
      }
    };

    if (is_label) {
      std::vector<ClassifyItem> items;
      items.reserve(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) items.push_back({corpus_.records[rows[k]].text, instructions[k]});
      const auto results = backend->try_classify(items, dispatch);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!results[k].ok()) {
          fail(rows[k], results[k].error);
          continue;
        }
        c.present[rows[k]] = 1;
        c.truth[rows[k]] = results[k].value->answer == Answer::Yes;
      }
    } else {
      std::vector<ExtractItem> items;
      items.reserve(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) items.push_back({corpus_.records[rows[k]].text, instructions[k]});
      auto results = backend->try_extract(items, dispatch);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!results[k].ok()) {
          fail(rows[k], results[k].error);
          continue;
        }
        c.present[rows[k]] = 1;
        c.spans[rows[k]] = std::move(results[k].value->spans);
        c.spans[rows[k]].record_id = corpus_.records[rows[k]].id;
      }
    }
    return c;
  }

  ResultSet assemble(const PlanNode& output) {
    ResultSet rs;
    std::vector<std::pair<std::string, const Column*>> fields;
    for (const auto& f : output.fields) fields.emplace_back(f.name, &columns_.at(f.node));
    const Column* stream = output.input.empty() ? nullptr : &columns_.at(output.input);

    for (std::size_t i = 0; i < n(); ++i) {
      const auto& rec = corpus_.records[i];
      bool keep = stream == nullptr || stream->present[i];
      for (const auto& [name, col] : fields) keep = keep && col->present[i];
      if (!keep) {
        rs.dropped.push_back(rec.id);
        rs.drop_reasons.emplace(rec.id, reasons_[i].empty() ? "filtered" : reasons_[i]);
        continue;
      }
      ResultRow row{rec.id, {}};
      for (const auto& [name, col] : fields) {
        switch (col->type) {
          case ValueType::Records: row.fields.emplace(name, rec.text); break;
          case ValueType::Boolean: row.fields.emplace(name, static_cast<bool>(col->truth[i])); break;
          case ValueType::SpanSet: row.fields.emplace(name, col->spans[i]); break;
          case ValueType::None: break;
        }
      }
      rs.rows.push_back(std::move(row));
    }
    return rs;
  }

  const Plan& plan_;
  const Corpus& corpus_;
  const BackendBindings& bindings_;
  const ExecuteOptions& options_;
  std::unordered_map<std::string, Column> columns_;
  std::vector<std::string> reasons_;
};

}  // namespace

std::pair<ResultSet, CostReport> execute(const Plan& plan, const Corpus& corpus, const BackendBindings& bindings,
                                         const ExecuteOptions& options) {
  const auto report = validate_plan(plan);
  if (!report.ok()) throw Error(ErrorCode::InvalidPlan, report.to_text());
  for (const auto& node : plan.nodes) {
    if (node.kind == NodeKind::Label && bindings.label == nullptr) throw Error(ErrorCode::UnboundBackend, "Label");
    if (node.kind == NodeKind::Span && bindings.span == nullptr) throw Error(ErrorCode::UnboundBackend, "Span");
  }

  std::vector<Backend*> backends;
  for (Backend* b : {bindings.label, bindings.span}) {
    if (b != nullptr && std::find(backends.begin(), backends.end(), b) == backends.end()) backends.push_back(b);
  }
  std::vector<BackendStats> before;
  for (Backend* b : backends) before.push_back(b->stats());

  const auto plan_id = plan_digest(plan);
  ResultSet results = Evaluator(plan, corpus, bindings, options).run();
  results.plan_id = plan_id;

  CostReport cost;
  cost.plan_id = plan_id;
  cost.totals.backend_id = "total";
  for (std::size_t k = 0; k < backends.size(); ++k) {
    const auto delta = backends[k]->stats() - before[k];
    const auto& model = backends[k]->descriptor().cost;
    BackendCost c;
    c.backend_id = backends[k]->descriptor().id;
    c.wire_calls = delta.wire_calls;
    c.items_sent = delta.items_sent;
    c.chars_sent = delta.chars_sent;
    c.cache_hits = delta.cache_hits;
    c.invalid_spans_dropped = delta.invalid_spans_dropped;
    c.failed_items = delta.failed_items;
    c.wall_time = delta.wall_time;
    c.estimated_cost = model.per_call * static_cast<double>(c.wire_calls) +
                       model.per_1k_chars * static_cast<double>(c.chars_sent) / 1000.0;
    cost.backends.push_back(c);

    auto& t = cost.totals;
    t.wire_calls += c.wire_calls;
    t.items_sent += c.items_sent;
    t.chars_sent += c.chars_sent;
    t.cache_hits += c.cache_hits;
    t.invalid_spans_dropped += c.invalid_spans_dropped;
    t.failed_items += c.failed_items;
    t.estimated_cost += c.estimated_cost;
    t.wall_time += c.wall_time;
  }
  std::sort(cost.backends.begin(), cost.backends.end(),
            [](const BackendCost& a, const BackendCost& b) { return a.backend_id < b.backend_id; });
  return {std::move(results), std::move(cost)};
}

json CostReport::to_json(bool include_wall_time) const {
  json per = json::object();
  for (const auto& b : backends) per[b.backend_id] = cost_json(b, include_wall_time);
  return {{"plan_id", plan_id}, {"backends", per}, {"totals", cost_json(totals, include_wall_time)}};
}

SpeedupRatio speedup_ratio(const CostReport& a, const CostReport& b) {
  if (a.plan_id != b.plan_id) throw Error(ErrorCode::MismatchedRuns, a.plan_id + " vs " + b.plan_id);
  return {ratio(static_cast<double>(b.totals.wall_time.count()), static_cast<double>(a.totals.wall_time.count())),
          ratio(b.totals.estimated_cost, a.totals.estimated_cost)};
}

json to_json(const FieldValue& value) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SpanSet>) return to_json(v.spans);
        else return v;
      },
      value);
}

FieldValue field_value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    SpanSet s;
    s.spans = spans_from_json(j);
    return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unsupported field value " + j.dump());
}

std::string serialize_results(const ResultSet& results, const CostReport& cost) {
  std::string out;
  for (const auto& row : results.rows) {
    json fields = json::object();
    for (const auto& [name, value] : row.fields) fields[name] = to_json(value);
    out += json{{"id", row.record_id}, {"fields", fields}}.dump();
    out.push_back('\n');
  }
  out += json{{"_dropped", results.dropped}, {"_cost", cost.to_json(false)}, {"_plan_id", results.plan_id}}.dump();
  out.push_back('\n');
  return out;
}

ResultSet parse_results(std::string_view jsonl) {
  ResultSet rs;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < jsonl.size()) {
    auto eol = jsonl.find('\n', pos);
    if (eol == std::string_view::npos) eol = jsonl.size();
    const auto line = jsonl.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedLine(line_no, e.what());
    }
    if (j.contains("_dropped")) {
      rs.dropped = j.at("_dropped").get<std::vector<std::string>>();
      rs.plan_id = j.value("_plan_id", "");
      continue;
    }
    ResultRow row;
    row.record_id = j.at("id").get<std::string>();
    for (const auto& [name, value] : j.at("fields").items()) {
      auto v = field_value_from_json(value);
      if (auto* s = std::get_if<SpanSet>(&v)) s->record_id = row.record_id;
      row.fields.emplace(name, std::move(v));
    }
    rs.rows.push_back(std::move(row));
  }
  return rs;
}

}  // namespace falconer
