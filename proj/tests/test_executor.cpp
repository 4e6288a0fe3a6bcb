#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "falconer/error.hpp"
#include "falconer/executor.hpp"
#include "falconer/text.hpp"
#include "plan_gen.hpp"
#include "support.hpp"

using namespace falconer;
using nlohmann::json;

namespace {

Plan finance_plan() { return parse_plan(testsupport::slurp(testsupport::fixture("finance_lecturer_plan.json"))); }

Plan single_label_plan(const std::string& label) {
  return parse_plan(json{{"version", "plan-v1"},
                         {"nodes",
                          {{{"id", "s"}, {"kind", "Source"}},
                           {{"id", "l"}, {"kind", "Label"}, {"instruction", label}, {"input", "s"}},
                           {{"id", "f"}, {"kind", "Filter"}, {"predicate", "l"}, {"input", "s"}},
                           {{"id", "who"}, {"kind", "Span"}, {"instruction", "Extract the lecturer"}, {"input", "f"}},
                           {{"id", "o"}, {"kind", "Output"}, {"fields", {{{"name", "lecturer"}, {"node", "who"}}}}}}},
                         {"output", "o"}});
}

Plan and_plan() {
  return parse_plan(json{{"version", "plan-v1"},
                         {"nodes",
                          {{{"id", "s"}, {"kind", "Source"}},
                           {{"id", "h"}, {"kind", "Label"}, {"instruction", "health"}, {"input", "s"}},
                           {{"id", "b"}, {"kind", "Label"}, {"instruction", "brain"}, {"input", "s"}},
                           {{"id", "both"}, {"kind", "Bool"}, {"op", "And"}, {"inputs", {"h", "b"}}},
                           {{"id", "f"}, {"kind", "Filter"}, {"predicate", "both"}, {"input", "s"}},
                           {{"id", "who"}, {"kind", "Span"}, {"instruction", "Extract the lecturer"}, {"input", "f"}},
                           {{"id", "o"}, {"kind", "Output"}, {"fields", {{{"name", "lecturer"}, {"node", "who"}}}}}}},
                         {"output", "o"}});
}

std::vector<std::string> row_ids(const ResultSet& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs.rows) out.push_back(r.record_id);
  return out;
}

// Finance oracle: lowercased whitespace words, trailing punctuation stripped.
bool mentions_finance(const std::string& text) {
  static const std::set<std::string> words{"finance", "markets", "investors", "banking"};
  std::string word;
  for (char c : text::lowercase(text) + " ") {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += c;
    } else {
      if (words.contains(word)) return true;
      word.clear();
    }
  }
  return false;
}

/// Classify backend that fails on texts containing "boom".
class FlakyBackend : public Backend {
 public:
  FlakyBackend() : Backend([] {
    BackendDescriptor d;
    d.id = "flaky";
    d.max_batch = 1;
    return d;
  }()) {}

 protected:
  std::vector<ClassifyResult> classify_batch(std::span<const ClassifyItem> items) override {
    std::vector<ClassifyResult> out;
    for (const auto& i : items) {
      if (i.text.find("boom") != std::string::npos) throw Error(ErrorCode::BackendUnavailable, "exploded");
      out.push_back(ClassifyResult::from_score(1.0));
    }
    return out;
  }
  std::vector<ExtractResult> extract_batch(std::span<const ExtractItem> items) override {
    return std::vector<ExtractResult>(items.size());
  }
};

}  // namespace

TEST(Execute, FinanceLecturerFixture) {
  const auto corpus = testsupport::ted_corpus();
  auto label = testsupport::fixture_mock();
  auto span = testsupport::fixture_mock();
  const auto [rs, cost] = execute(finance_plan(), corpus, {label.get(), span.get()});

  std::vector<std::string> want;
  for (const auto& r : corpus.records) {
    if (mentions_finance(r.text)) want.push_back(r.id);
  }
  ASSERT_EQ(want.size(), 7u);
  EXPECT_EQ(row_ids(rs), want);
  EXPECT_EQ(label->stats().items_sent, 20u);
  EXPECT_EQ(span->stats().items_sent, 7u);
  EXPECT_EQ(rs.dropped.size(), 13u);

  for (const auto& row : rs.rows) {
    const auto& spans = std::get<SpanSet>(row.fields.at("spans"));
    ASSERT_EQ(spans.spans.size(), 1u) << row.record_id;
    const auto& text = std::get<std::string>(row.fields.at("text"));
    EXPECT_NE(text.find(spans.spans[0].surface), std::string::npos);
    EXPECT_EQ(spans.record_id, row.record_id);
  }
  EXPECT_EQ(std::get<SpanSet>(rs.rows[1].fields.at("spans")).spans[0].surface, "Hannah Schultz");
  EXPECT_EQ(cost.totals.items_sent, 27u);
  EXPECT_EQ(rs.plan_id, plan_digest(finance_plan()));
}

TEST(Execute, FilterExtractTemplateBehavesLikeFixture) {
  const auto corpus = testsupport::ted_corpus();
  auto b = testsupport::fixture_mock();
  const auto a = execute(finance_plan(), corpus, {b.get(), b.get()}).first;
  const auto t = execute(make_filter_extract("Is this about finance?", "Extract the lecturer of the speak"), corpus,
                         {b.get(), b.get()})
                     .first;
  EXPECT_EQ(a.rows, t.rows);
  EXPECT_EQ(a.dropped, t.dropped);
  EXPECT_EQ(plan_digest(make_filter_extract("finance", "Extract the lecturer of the speak in the given text.")),
            plan_digest(finance_plan()));
}

TEST(Execute, MultiEntityIsIntersection) {
  const auto corpus = testsupport::ted_corpus();
  auto b = testsupport::fixture_mock();
  const auto both = execute(and_plan(), corpus, {b.get(), b.get()}).first;
  const auto health = execute(single_label_plan("health"), corpus, {b.get(), b.get()}).first;
  const auto brain = execute(single_label_plan("brain"), corpus, {b.get(), b.get()}).first;
  std::vector<std::string> want;
  const auto h = row_ids(health), br = row_ids(brain);
  std::set_intersection(h.begin(), h.end(), br.begin(), br.end(), std::back_inserter(want));
  EXPECT_EQ(row_ids(both), want);
  EXPECT_EQ(want, (std::vector<std::string>{"ted-07", "ted-11"}));
  for (const auto& row : both.rows) {
    const auto it = std::find_if(health.rows.begin(), health.rows.end(), [&](const auto& r) { return r.record_id == row.record_id; });
    EXPECT_EQ(row.fields, it->fields);
  }
}

TEST(Execute, SourceOnlyEchoesCorpus) {
  const auto corpus = testsupport::ted_corpus();
  const auto plan = parse_plan(json::parse(R"({"version":"plan-v1","nodes":[{"id":"s","kind":"Source"},
    {"id":"o","kind":"Output","fields":[{"name":"text","node":"s"}]}],"output":"o"})"));
  const auto [rs, cost] = execute(plan, corpus, {});
  ASSERT_EQ(rs.rows.size(), corpus.size());
  EXPECT_EQ(std::get<std::string>(rs.rows[3].fields.at("text")), corpus.records[3].text);
  EXPECT_TRUE(cost.backends.empty());
  EXPECT_EQ(cost.totals.wire_calls, 0u);
  EXPECT_EQ(cost.totals.estimated_cost, 0.0);
}

TEST(Execute, UnboundBackend) {
  auto b = testsupport::fixture_mock();
  try {
    execute(finance_plan(), testsupport::ted_corpus(), {b.get(), nullptr});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundBackend);
  }
}

TEST(Execute, InvalidPlanRejected) {
  auto doc = json::parse(testsupport::slurp(testsupport::fixture("finance_lecturer_plan.json")));
  doc["nodes"][2]["predicate"] = "lecturer";
  auto b = testsupport::fixture_mock();
  EXPECT_THROW(execute(parse_plan(doc), testsupport::ted_corpus(), {b.get(), b.get()}), Error);
}

TEST(Execute, ParallelismDoesNotChangeBytes) {
  const auto corpus = testsupport::ted_corpus();
  BackendDescriptor d;
  d.id = "mock:fixture";
  d.max_batch = 3;
  auto b1 = testsupport::fixture_mock(d);
  auto b8 = testsupport::fixture_mock(d);
  const auto [r1, c1] = execute(finance_plan(), corpus, {b1.get(), b1.get()}, {0, 1, false, false});
  const auto [r8, c8] = execute(finance_plan(), corpus, {b8.get(), b8.get()}, {0, 8, false, false});
  EXPECT_EQ(serialize_results(r1, c1), serialize_results(r8, c8));
}

TEST(Execute, CachedRerunMakesNoWireCalls) {
  const auto corpus = testsupport::ted_corpus();
  auto b = testsupport::fixture_mock();
  b->set_cache(std::make_shared<ResultCache>());
  const auto first = execute(finance_plan(), corpus, {b.get(), b.get()}, {0, 1, true, false});
  const auto second = execute(finance_plan(), corpus, {b.get(), b.get()}, {0, 1, true, false});
  EXPECT_GT(first.second.totals.wire_calls, 0u);
  EXPECT_EQ(second.second.totals.wire_calls, 0u);
  EXPECT_EQ(second.second.totals.cache_hits, 27u);
  EXPECT_EQ(first.first, second.first);
}

TEST(Execute, CostModelArithmetic) {
  BackendDescriptor d;
  d.id = "mock:priced";
  d.cost = {0.25, 2.0};
  d.max_batch = 8;
  auto b = testsupport::fixture_mock(d);
  const auto corpus = testsupport::ted_corpus();
  const auto [rs, cost] = execute(finance_plan(), corpus, {b.get(), b.get()});
  ASSERT_EQ(cost.backends.size(), 1u);
  const auto& c = cost.backends[0];
  std::uint64_t chars = 0;
  for (const auto& r : corpus.records) chars += text::scalar_length(r.text) + text::scalar_length("finance");
  for (const auto& row : rs.rows) {
    chars += text::scalar_length(std::get<std::string>(row.fields.at("text"))) +
             text::scalar_length("Extract the lecturer of the speak in the given text.");
  }
  EXPECT_EQ(c.chars_sent, chars);
  EXPECT_EQ(c.wire_calls, 3u + 1u);  // ceil(20/8) + ceil(7/8)
  EXPECT_DOUBLE_EQ(c.estimated_cost, 0.25 * 4 + 2.0 * static_cast<double>(chars) / 1000.0);
  EXPECT_DOUBLE_EQ(cost.totals.estimated_cost, c.estimated_cost);
}

TEST(Execute, TemplateBindingDropsEmptyRecords) {
  const auto corpus = make_corpus({"Grace Liu gave a talk about health.", "Nobody spoke today."});
  const auto plan = parse_plan(json::parse(R"({"version":"plan-v1","nodes":[
    {"id":"s","kind":"Source"},
    {"id":"who","kind":"Span","instruction":"Extract the lecturer","input":"s"},
    {"id":"job","kind":"Span","instruction":{"template":"Extract the lecturer named {person}","bindings":{"person":"who"}},"input":"s"},
    {"id":"o","kind":"Output","fields":[{"name":"who","node":"who"},{"name":"job","node":"job"}]}],"output":"o"})"));
  auto b = testsupport::fixture_mock();
  const auto rs = execute(plan, corpus, {b.get(), b.get()}).first;
  ASSERT_EQ(rs.rows.size(), 1u);
  EXPECT_EQ(rs.rows[0].record_id, "rec-000000");
  ASSERT_EQ(rs.dropped, std::vector<std::string>{"rec-000001"});
  EXPECT_EQ(rs.drop_reasons.at("rec-000001"), "empty_binding:job:person");
}

TEST(Execute, FailedItemsDropRecordsUnlessStrict) {
  const auto corpus = make_corpus({"fine", "boom goes the item", "also fine"});
  const auto plan = parse_plan(json::parse(R"({"version":"plan-v1","nodes":[
    {"id":"s","kind":"Source"},
    {"id":"l","kind":"Label","instruction":"anything","input":"s"},
    {"id":"o","kind":"Output","fields":[{"name":"v","node":"l"}]}],"output":"o"})"));
  FlakyBackend b;
  const auto [rs, cost] = execute(plan, corpus, {&b, &b});
  EXPECT_EQ(row_ids(rs), (std::vector<std::string>{"rec-000000", "rec-000002"}));
  EXPECT_EQ(rs.drop_reasons.at("rec-000001").rfind("backend_error:l", 0), 0u);
  EXPECT_EQ(cost.totals.failed_items, 1u);
  try {
    execute(plan, corpus, {&b, &b}, {0, 1, false, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
    EXPECT_NE(e.detail().find("node l"), std::string::npos);
  }
}

TEST(Execute, ResultsSerializationRoundTrips) {
  auto b = testsupport::fixture_mock();
  const auto [rs, cost] = execute(finance_plan(), testsupport::ted_corpus(), {b.get(), b.get()});
  const auto bytes = serialize_results(rs, cost);
  const auto back = parse_results(bytes);
  EXPECT_EQ(back.rows, rs.rows);
  EXPECT_EQ(back.dropped, rs.dropped);
  EXPECT_EQ(back.plan_id, rs.plan_id);
  std::size_t lines = std::count(bytes.begin(), bytes.end(), '\n');
  EXPECT_EQ(lines, rs.rows.size() + 1);
  const auto trailer = json::parse(bytes.substr(bytes.rfind('\n', bytes.size() - 2) + 1));
  EXPECT_TRUE(trailer.contains("_dropped"));
  EXPECT_TRUE(trailer.contains("_cost"));
}

TEST(Speedup, Ratios) {
  auto b = testsupport::fixture_mock();
  const auto cost = execute(finance_plan(), testsupport::ted_corpus(), {b.get(), b.get()}).second;
  auto r = speedup_ratio(cost, cost);
  EXPECT_EQ(r.time, 1.0);
  EXPECT_EQ(r.cost, 1.0);
  CostReport other = cost;
  other.plan_id = "different";
  EXPECT_THROW(speedup_ratio(cost, other), Error);
  CostReport zero;
  zero.plan_id = cost.plan_id;
  r = speedup_ratio(zero, zero);
  EXPECT_EQ(r.time, 1.0);
  EXPECT_EQ(r.cost, 1.0);
}

TEST(ExecuteProperty, BooleanTreesMatchTruthTable) {
  std::mt19937_64 gen(99);
  std::vector<std::vector<bool>> truth;
  const auto corpus = plangen::keyword_corpus(gen, 50, 4, truth);
  BackendDescriptor d;
  d.id = "mock:labels";
  MockBackend b(plangen::label_rules(4), d);
  for (int trial = 0; trial < 100; ++trial) {
    const auto e = plangen::random_expr(gen, 3, 4);
    const auto before = b.stats();
    const auto rs = execute(plangen::plan_for(e, false), corpus, {&b, &b}, {0, 1 + gen() % 4, false, false}).first;
    ASSERT_EQ(rs.rows.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      ASSERT_EQ(std::get<bool>(rs.rows[i].fields.at("value")), plangen::eval(e, truth[i])) << "record " << i;
    }
    // Conservation: one classify item per distinct label node per record.
    std::set<int> used;
    std::function<void(const plangen::Expr&)> walk = [&](const plangen::Expr& x) {
      if (x.kind == plangen::Expr::Leaf) used.insert(x.label);
      for (const auto& k : x.kids) walk(k);
    };
    walk(e);
    const auto delta = b.stats() - before;
    ASSERT_EQ(delta.items_sent + delta.cache_hits, used.size() * corpus.size());

    const auto filtered = execute(plangen::plan_for(e, true), corpus, {&b, &b}).first;
    std::vector<std::string> want;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (plangen::eval(e, truth[i])) want.push_back(corpus.records[i].id);
    }
    ASSERT_EQ(row_ids(filtered), want);
  }
}
