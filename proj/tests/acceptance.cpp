// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero on any failure.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "f1_props.hpp"
#include "falconer/error.hpp"
#include "falconer/eval.hpp"
#include "falconer/executor.hpp"
#include "falconer/generator.hpp"
#include "falconer/planner.hpp"
#include "plan_gen.hpp"
#include "support.hpp"

using namespace falconer;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Failed {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failed{why};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::string> row_ids(const ResultSet& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs.rows) out.push_back(r.record_id);
  return out;
}

// --- 1 ---------------------------------------------------------------------

std::string classification_oracle() {
  std::mt19937_64 gen(1001);
  const auto t0 = Clock::now();
  std::size_t tie_cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t size = 2 + gen() % 999;
    const std::size_t levels = 1 + gen() % (trial % 4 == 0 ? 3 : 1000);
    std::vector<std::string> texts;
    std::vector<double> scores;
    json table = json::object();
    for (std::size_t i = 0; i < size; ++i) {
      texts.push_back("t" + std::to_string(i));
      scores.push_back(static_cast<double>(gen() % levels) / static_cast<double>(levels));
      table[texts.back()] = scores.back();
    }
    const auto corpus = make_corpus(texts);
    const std::size_t n = 1 + gen() % (size / 2);
    auto backend = testsupport::score_table_backend(table, 1 + gen() % 64);
    const auto set = generate_classification_set(corpus, "topic", n, *backend);

    // Sort (score desc, corpus index asc), slice both ends, restore corpus order.
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<std::size_t> bottom(order.end() - static_cast<std::ptrdiff_t>(n), order.end());
    std::sort(top.begin(), top.end());
    std::sort(bottom.begin(), bottom.end());
    std::vector<ClassificationExample> want;
    for (auto i : top) want.push_back({corpus.records[i].id, texts[i], Answer::Yes, scores[i]});
    for (auto i : bottom) want.push_back({corpus.records[i].id, texts[i], Answer::No, scores[i]});
    require(set.classification == want, "mismatch on trial " + std::to_string(trial));
    if (std::set<double>(scores.begin(), scores.end()).size() < size) ++tie_cases;
  }
  const auto elapsed = seconds_since(t0);
  require(tie_cases > 0, "no tie cases generated");
  require(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
  std::ostringstream s;
  s << "200 corpora, " << tie_cases << " with ties, " << elapsed << " s";
  return s.str();
}

// --- 2 ---------------------------------------------------------------------

std::string random_text(std::mt19937_64& gen, std::size_t words) {
  static const std::vector<std::string> pool{"alpha", "Beta", "x", "é", "中文", "42", "q,", "(r)", "s.", "don't", "!"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += (i ? (gen() % 4 ? " " : "  ") : "") + pool[gen() % pool.size()];
  return s;
}

std::string bio_round_trip() {
  std::mt19937_64 gen(1002);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto text = random_text(gen, 1 + gen() % 25);
    const auto tokens = tokenize(text);
    SpanSet s{"r", {}};
    for (std::size_t i = 0; i < tokens.size();) {
      if (gen() % 3 == 0) {
        const auto last = std::min(tokens.size() - 1, i + gen() % 4);
        s.spans.push_back(make_span(text, tokens[i].start, tokens[last].end));
        i = last + 1 + gen() % 2;
      } else {
        ++i;
      }
    }
    require(decode_bio(encode_bio(s, tokens), tokens, text).spans == s.spans, "round trip failed: " + text);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const auto text = random_text(gen, 1 + gen() % 25);
    const auto tokens = tokenize(text);
    BioSequence tags;
    for (std::size_t i = 0; i < tokens.size(); ++i) tags.push_back(static_cast<Bio>("BIO"[gen() % 3]));
    const auto spans = decode_bio(tags, tokens, text).spans;
    require(spans_valid(spans, text), "lenient decode produced invalid spans");
    for (std::size_t k = 1; k < spans.size(); ++k) require(spans[k - 1].end <= spans[k].start, "unsorted or overlapping");
  }
  return "1000 round trips, 1000 lenient decodes";
}

// --- 3 ---------------------------------------------------------------------

std::string boolean_plans() {
  std::mt19937_64 gen(1003);
  std::vector<std::vector<bool>> truth;
  const auto corpus = plangen::keyword_corpus(gen, 50, 4, truth);
  BackendDescriptor d;
  d.id = "mock:labels";
  MockBackend labels(plangen::label_rules(4), d);
  for (int trial = 0; trial < 100; ++trial) {
    const auto e = plangen::random_expr(gen, 3, 4);
    const auto rs = execute(plangen::plan_for(e, false), corpus, {&labels, &labels}).first;
    require(rs.rows.size() == corpus.size(), "rows missing");
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      require(std::get<bool>(rs.rows[i].fields.at("value")) == plangen::eval(e, truth[i]),
              "plan " + std::to_string(trial) + " record " + std::to_string(i));
    }
  }

  auto plan_for = [](const std::vector<std::string>& topics) {
    json nodes = {{{"id", "s"}, {"kind", "Source"}}};
    std::vector<std::string> ids;
    for (const auto& t : topics) {
      nodes.push_back({{"id", t}, {"kind", "Label"}, {"instruction", t}, {"input", "s"}});
      ids.push_back(t);
    }
    std::string pred = ids[0];
    if (ids.size() > 1) {
      nodes.push_back({{"id", "all"}, {"kind", "Bool"}, {"op", "And"}, {"inputs", ids}});
      pred = "all";
    }
    nodes.push_back({{"id", "f"}, {"kind", "Filter"}, {"predicate", pred}, {"input", "s"}});
    nodes.push_back({{"id", "who"}, {"kind", "Span"}, {"instruction", "Extract the lecturer"}, {"input", "f"}});
    nodes.push_back({{"id", "o"}, {"kind", "Output"}, {"fields", {{{"name", "lecturer"}, {"node", "who"}}}}});
    return parse_plan(json{{"version", "plan-v1"}, {"nodes", nodes}, {"output", "o"}});
  };
  const auto ted = testsupport::ted_corpus();
  auto mock = testsupport::fixture_mock();
  const auto both = execute(plan_for({"health", "brain"}), ted, {mock.get(), mock.get()}).first;
  const auto h = row_ids(execute(plan_for({"health"}), ted, {mock.get(), mock.get()}).first);
  const auto b = row_ids(execute(plan_for({"brain"}), ted, {mock.get(), mock.get()}).first);
  std::vector<std::string> inter;
  std::set_intersection(h.begin(), h.end(), b.begin(), b.end(), std::back_inserter(inter));
  require(row_ids(both) == inter, "And(health, brain) differs from the intersection");
  require(!inter.empty(), "intersection is empty");
  return "100 random plans; And(health, brain) = " + std::to_string(inter.size()) + " records";
}

// --- 4 ---------------------------------------------------------------------

std::string conditional_extraction() {
  const auto plan = parse_plan(testsupport::slurp(testsupport::fixture("finance_lecturer_plan.json")));
  auto label = testsupport::fixture_mock();
  auto span = testsupport::fixture_mock();
  const auto [rs, cost] = execute(plan, testsupport::ted_corpus(), {label.get(), span.get()});
  const auto extract_items = span->stats().items_sent;
  require(extract_items == 7, "extract backend received " + std::to_string(extract_items) + " items");
  testsupport::TempDir dir;
  testsupport::spit(dir / "results.jsonl", serialize_results(rs, cost));
  std::size_t rows = 0;
  std::istringstream lines(testsupport::slurp(dir / "results.jsonl"));
  for (std::string line; std::getline(lines, line);) rows += json::parse(line).contains("id");
  require(rows == 7, std::to_string(rows) + " rows in results.jsonl");
  return "20 classified, 7 extracted, 7 rows";
}

// --- 5 ---------------------------------------------------------------------

std::string degradation() {
  // 10k records "w0 .. w11", one span per record ending at token 9.
  std::mt19937_64 gen(1005);
  std::string text;
  for (int i = 0; i < 12; ++i) text += (i ? " w" : "w") + std::to_string(i);
  const auto tokens = tokenize(text);
  TrainingSet clean;
  clean.kind = TrainingKind::Extraction;
  clean.label_or_instruction = "x";
  for (int r = 0; r < 10000; ++r) {
    const auto id = "r" + std::to_string(r);
    const auto first = gen() % 10;
    SpanSet s{id, {make_span(text, tokens[first].start, tokens[9].end)}};
    clean.extraction.push_back({id, text, s, encode_bio(s, tokens)});
  }
  const auto noisy = degrade_spans(clean, 0);

  std::vector<double> observed(10, 0.0);
  for (std::size_t r = 0; r < clean.size(); ++r) {
    const auto& before = clean.extraction[r].spans.spans[0];
    const auto& after = noisy.extraction[r].spans.spans;
    require(after.size() == 1, "span count changed");
    const auto [b_first, b_last] = token_range(before, tokens);
    const auto [a_first, a_last] = token_range(after[0], tokens);
    require(a_last == b_last && after[0].end == before.end, "end moved in " + clean.extraction[r].record_id);
    require(a_first <= a_last, "start after end");
    observed[a_first] += 1;
  }
  double stat = 0;
  for (double o : observed) stat += (o - 1000.0) * (o - 1000.0) / 1000.0;
  const boost::math::chi_squared dist(9);
  const double p = boost::math::cdf(boost::math::complement(dist, stat));
  require(p > 0.01, "chi-square p = " + std::to_string(p));
  std::ostringstream s;
  s << "10000 spans, ends preserved, chi2 = " << stat << ", p = " << p;
  return s.str();
}

// --- 6 ---------------------------------------------------------------------

std::string word_f1_checks() {
  const auto c = make_corpus({"a b c d e f"});
  auto spans = [&](std::vector<std::pair<std::size_t, std::size_t>> ranges) {
    SpanSet s{c.records[0].id, {}};
    for (auto [f, l] : ranges) s.spans.push_back(f1props::tok_span(c, 0, f, l));
    return std::vector<SpanSet>{s};
  };
  require(word_f1(spans({{0, 1}, {3, 4}}), spans({{0, 1}, {3, 4}}), c).overall.f1 == 1.0, "identity");
  const auto half = word_f1(spans({{0, 1}}), spans({{0, 3}}), c).overall;
  require(half.precision == 1.0 && half.recall == 0.5, "P/R on the half case");
  require(std::abs(half.f1 - 2.0 / 3.0) <= 1e-12, "F1 on the half case");
  require(word_f1(spans({{4, 5}}), spans({{0, 1}}), c).overall.f1 == 0.0, "disjoint");

  std::mt19937_64 gen(1006);
  const auto corpus = make_corpus({"x y z x y", "Alpha beta ALPHA gamma", "one two three four five six", "k", "a b a b"});
  for (int trial = 0; trial < 500; ++trial) {
    const auto v = f1props::check_fixture(gen, corpus);
    require(!v, "fixture " + std::to_string(trial) + ": " + (v ? v->what : ""));
  }
  return "3 examples, 500 random fixtures";
}

// --- 7 ---------------------------------------------------------------------

std::string planning_score() {
  std::mt19937_64 gen(1007);
  std::vector<std::vector<bool>> truth;
  const auto probe = plangen::keyword_corpus(gen, 40, 4, truth);
  BackendDescriptor d;
  d.id = "mock:labels";
  MockBackend labels(plangen::label_rules(4), d);
  std::map<std::string, Plan> golden;
  std::vector<TaskPlan> candidates;
  for (int i = 0; i < 25; ++i) {
    const auto task = "task-" + std::to_string(i);
    const auto e = plangen::random_expr(gen, 2, 4);
    golden.emplace(task, plangen::plan_for(e, true));
    if (i == 7) {
      plangen::Expr negated;
      negated.kind = plangen::Expr::Not;
      negated.kids = {e};
      candidates.push_back({task, plangen::plan_for(negated, true), ""});
    } else {
      candidates.push_back({task, plangen::shuffle_ids(golden.at(task), gen), ""});
    }
  }
  const auto score = score_planning(candidates, golden, probe, labels);
  require(score.score == 0.96, "score " + std::to_string(score.score));
  std::vector<TaskPlan> self;
  for (const auto& [task, plan] : golden) self.push_back({task, plan, ""});
  const auto perfect = score_planning(self, golden, probe, labels);
  require(perfect.score == 1.0, "golden-vs-golden " + std::to_string(perfect.score));
  return "24/25 = 0.96, golden = 1.0";
}

// --- 8 ---------------------------------------------------------------------

int cli(const std::string& args) {
  const std::string cmd = std::string(FALCONER_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string determinism() {
  testsupport::TempDir dir;
  const auto rules = "mock:" + testsupport::fixture("mock_rules.json").string();
  const auto corpus = q(testsupport::fixture("ted_talks.jsonl"));
  for (int parallel : {1, 8}) {
    const auto args = "run --plan " + q(testsupport::fixture("finance_lecturer_plan.json")) + " --corpus " + corpus + " --backend " +
                      q(rules) + " --batch 2 --parallel " + std::to_string(parallel) + " --out " +
                      q(dir / ("p" + std::to_string(parallel)));
    require(cli(args) == 0, "run failed at parallel " + std::to_string(parallel));
  }
  const auto a = testsupport::slurp(dir / "p1" / "results.jsonl");
  require(!a.empty() && a == testsupport::slurp(dir / "p8" / "results.jsonl"), "results.jsonl differs");

  for (const char* out : {"g1", "g2"}) {
    require(cli("--seed 17 generate --mode extraction --corpus " + corpus +
                " --instruction 'Extract the lecturer' --n 12 --backend " + q(rules) + " --out " + q(dir / out)) == 0,
            "generate failed");
  }
  const auto m1 = json::parse(testsupport::slurp(dir / "g1" / "manifest.json"));
  const auto m2 = json::parse(testsupport::slurp(dir / "g2" / "manifest.json"));
  require(m1.at("digest") == m2.at("digest"), "dataset digests differ");
  return "parallel 1 vs 8 identical; digest " + m1.at("digest").get<std::string>().substr(0, 12);
}

// --- 9 ---------------------------------------------------------------------

std::string efficiency() {
  const auto t0 = Clock::now();
  BackendDescriptor proxy;
  proxy.id = "mock:proxy";
  proxy.cost = {0.0, 1.0};
  proxy.simulated_latency = LatencyModel{std::chrono::microseconds(0), std::chrono::microseconds(1000)};
  BackendDescriptor annotator = proxy;
  annotator.id = "mock:annotator";
  annotator.cost = {0.0, 10.0};
  annotator.max_batch = 1;
  annotator.simulated_latency = LatencyModel{std::chrono::microseconds(0), std::chrono::microseconds(20000)};

  const auto plan = parse_plan(testsupport::slurp(testsupport::fixture("finance_lecturer_plan.json")));
  const auto corpus = testsupport::ted_corpus();
  auto p = testsupport::fixture_mock(proxy);
  auto a = testsupport::fixture_mock(annotator);
  const auto [proxy_rows, proxy_cost] = execute(plan, corpus, {p.get(), p.get()});
  const auto [annot_rows, annot_cost] = execute(plan, corpus, {a.get(), a.get()});
  require(proxy_rows.rows == annot_rows.rows, "runs disagree");
  const auto r = speedup_ratio(proxy_cost, annot_cost);
  const auto elapsed = seconds_since(t0);
  std::ostringstream s;
  s << "time x" << r.time << ", cost x" << r.cost << ", " << elapsed << " s";
  require(r.time >= 20.0 && r.cost >= 10.0, s.str());
  require(elapsed < 10.0, s.str());
  return s.str();
}

// --- 10 --------------------------------------------------------------------

std::string nli_golden() {
  const auto want = testsupport::slurp(testsupport::golden("nli_t_finance.txt"));
  require(!want.empty(), "golden file missing");
  require(render_nli_prompt("t", "finance").rendered == want, "rendered prompt differs from golden bytes");
  return std::to_string(want.size()) + " bytes";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"1 classification set equals sort-slice oracle", classification_oracle},
      {"2 BIO round trip and lenient decoding", bio_round_trip},
      {"3 boolean plans match truth tables", boolean_plans},
      {"4 conditional extraction sends 7 items", conditional_extraction},
      {"5 span degradation keeps ends, uniform starts", degradation},
      {"6 word-level F1 examples and properties", word_f1_checks},
      {"7 planning score 0.96 and 1.0", planning_score},
      {"8 deterministic run and generate", determinism},
      {"9 simulated speedup at least 20x time, 10x cost", efficiency},
      {"10 NLI prompt matches golden bytes", nli_golden},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    try {
      const auto detail = check();
      std::cout << "PASS " << name << " (" << detail << ")\n";
    } catch (const Failed& f) {
      ++failures;
      std::cout << "FAIL " << name << ": " << f.why << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL " << name << ": exception: " << e.what() << "\n";
    }
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
