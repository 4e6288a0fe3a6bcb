#include "falconer/planner.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "falconer/error.hpp"
#include "falconer/executor.hpp"

namespace falconer {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSchemaText = R"({
  "version": "plan-v1",
  "nodes": [
    {"id": "<unique id>", "kind": "Source"},
    {"id": "...", "kind": "Label", "instruction": "<label or template>", "input": "<records node>"},
    {"id": "...", "kind": "Span", "instruction": "<instruction or template>", "input": "<records node>"},
    {"id": "...", "kind": "Bool", "op": "And" | "Or" | "Not", "inputs": ["<boolean node>", "..."]},
    {"id": "...", "kind": "Filter", "predicate": "<boolean node>", "input": "<records node>"},
    {"id": "...", "kind": "Output", "fields": [{"name": "<field>", "node": "<node id>"}]}
  ],
  "output": "<id of the Output node>"
}
An instruction may also be {"template": "text with {slot}", "bindings": {"slot": "<Span node id>"}}.
Rules: exactly one Source and one Output; no cycles; Label and Bool nodes are boolean,
Source and Filter nodes are record sets, Span nodes are span sets; Not takes one input,
And/Or take two or more; nothing may reference the Output node.)";

constexpr std::string_view kPrimitiveText =
    "Label(text, label) -> boolean: is the text about the label?\n"
    "Span(text, instruction) -> list of character spans answering the instruction\n";

Plan parse_and_validate(std::string_view reply) {
  const auto doc = find_json_object(reply);
  if (!doc) throw Error(ErrorCode::NoJsonFound, "reply contains no JSON object");
  Plan plan;
  try {
    plan = parse_plan(*doc);
  } catch (const SchemaError& e) {
    throw Error(ErrorCode::PlanInvalidAfterRepairs, "schema error at " + e.path() + ": " + e.reason());
  }
  const auto report = validate_plan(plan);
  if (!report.ok()) throw Error(ErrorCode::PlanInvalidAfterRepairs, report.to_text());
  return plan;
}

}  // namespace

std::string build_planner_prompt(const PlannerRequest& request) {
  std::ostringstream out;
  out << "You translate an information extraction task into a plan: a JSON dataflow graph.\n\n"
      << "Plan schema:\n" << kSchemaText << "\n\n"
      << "Primitives:\n" << kPrimitiveText << "\n"
      << "Task:\n" << request.task << "\n";
  if (!request.icl_examples.empty()) {
    out << "\nExamples:\n";
    for (const auto& ex : request.icl_examples) {
      out << "\nTask:\n" << ex.task << "\nPlan:\n" << canonical_bytes(ex.plan) << "\n";
    }
  }
  out << "\nReply with the plan as a single JSON object.\n";
  return out.str();
}

Plan parse_planner_response(std::string_view reply) { return parse_and_validate(reply); }

PlannerOutcome request_plan(ChatClient& chat, const PlannerRequest& request, std::size_t repairs) {
  if (request.task.empty()) throw Error(ErrorCode::InvalidArgument, "planner task is empty");
  std::vector<ChatMessage> messages{{"user", build_planner_prompt(request)}};
  PlannerOutcome outcome;
  for (std::size_t round = 0;; ++round) {
    const auto reply = chat.complete(messages);
    ++outcome.rounds;
    try {
      outcome.plan = parse_and_validate(reply);
      return outcome;
    } catch (const Error& e) {
      if (round == repairs) throw;
      const auto feedback = e.code() == ErrorCode::NoJsonFound
                                ? std::string("No JSON object was found in your reply.")
                                : "The plan is invalid:\n" + e.detail();
      outcome.repair_log.push_back(feedback);
      messages.push_back({"assistant", reply});
      messages.push_back({"user", feedback + "\nReply with a corrected plan as a single JSON object."});
    }
  }
}

json PlanningScore::to_json() const {
  json f = json::array();
  for (const auto& x : failures) f.push_back({{"task", x.task}, {"kind", x.kind}});
  return {{"total", total}, {"correct", correct}, {"score", score}, {"failures", f}};
}

PlanningScore score_planning(const std::vector<TaskPlan>& candidates, const std::map<std::string, Plan>& golden,
                             const Corpus& probe, Backend& backend) {
  for (const auto& c : candidates) {
    if (!golden.contains(c.task)) throw Error(ErrorCode::MissingGolden, c.task);
  }
  if (probe.empty()) throw Error(ErrorCode::EmptyCorpus, "probe corpus is empty");

  const BackendBindings bindings{&backend, &backend};
  std::map<std::string, ResultSet> golden_runs;
  PlanningScore score;
  score.total = candidates.size();
  for (const auto& c : candidates) {
    auto fail = [&](std::string kind) { score.failures.push_back({c.task, std::move(kind)}); };
    if (!c.plan) {
      fail("no_plan");
      continue;
    }
    if (!validate_plan(*c.plan).ok()) {
      fail("invalid");
      continue;
    }
    auto it = golden_runs.find(c.task);
    if (it == golden_runs.end()) it = golden_runs.emplace(c.task, execute(golden.at(c.task), probe, bindings).first).first;
    ResultSet run;
    try {
      run = execute(*c.plan, probe, bindings).first;
    } catch (const Error&) {
      fail("execution_error");
      continue;
    }
    if (run.rows == it->second.rows && run.dropped == it->second.dropped) ++score.correct;
    else fail("behavior_mismatch");
  }
  score.score = score.total == 0 ? 0.0 : static_cast<double>(score.correct) / static_cast<double>(score.total);
  return score;
}

std::vector<TaskPlan> load_task_plans(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<TaskPlan> out;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw SchemaError(path.filename().string(), e.what());
    }
    if (!doc.is_object() || !doc.contains("task") || !doc.at("task").is_string()) {
      throw SchemaError(path.filename().string() + "/task", "expected string");
    }
    TaskPlan tp;
    tp.task = doc.at("task").get<std::string>();
    if (doc.contains("plan") && !doc.at("plan").is_null()) tp.plan = parse_plan(doc.at("plan"));
    tp.failure = doc.value("failure", std::string());
    out.push_back(std::move(tp));
  }
  return out;
}

}  // namespace falconer
