// Command-line driver: plan, validate, run, generate, degrade, eval, score-plans.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "falconer/backends.hpp"
#include "falconer/corpus.hpp"
#include "falconer/error.hpp"
#include "falconer/eval.hpp"
#include "falconer/executor.hpp"
#include "falconer/generator.hpp"
#include "falconer/plan.hpp"
#include "falconer/planner.hpp"
#include "falconer/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace falconer;

namespace {

enum Exit : int { kOk = 0, kInternal = 1, kValidation = 2, kPlanner = 3, kBackend = 4, kBadArgs = 5 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoJsonFound:
    case ErrorCode::PlanInvalidAfterRepairs:
      return kPlanner;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProtocolError:
      return kBackend;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidFraction:
    case ErrorCode::CorpusTooSmall:
    case ErrorCode::SampleTooLarge:
    case ErrorCode::EmptyLabel:
    case ErrorCode::EmptyInstruction:
    case ErrorCode::BadSplit:
    case ErrorCode::UnboundBackend:
    case ErrorCode::WrongKind:
      return kBadArgs;
    case ErrorCode::IoError:
      return kInternal;
    default:
      return kValidation;
  }
}

struct Globals {
  bool json_out = false;
  std::uint64_t seed = 0;
  std::string cache_dir;
};

struct Summary {
  std::string command;
  std::vector<std::string> artifacts;
  json extra = json::object();
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << bytes;
}

void progress(const std::string& line) { std::cerr << "falconer: " << line << "\n"; }

std::unique_ptr<Backend> open_backend(const std::string& spec, const Globals& g, bool cache) {
  auto backend = make_backend(spec);
  if (cache) {
    std::optional<fs::path> dir;
    if (!g.cache_dir.empty()) dir = g.cache_dir;
    backend->set_cache(std::make_shared<ResultCache>(dir));
  }
  return backend;
}

// --- plan -------------------------------------------------------------------

struct PlanArgs {
  std::string task, out, icl_dir, url, model = "gpt-4.1";
  std::size_t repairs = 2;
};

Summary cmd_plan(const PlanArgs& a) {
  PlannerRequest req{a.task, {}, a.model};
  if (!a.icl_dir.empty()) {
    for (auto& tp : load_task_plans(a.icl_dir)) {
      if (!tp.plan) continue;
      if (!validate_plan(*tp.plan).ok()) throw Error(ErrorCode::InvalidPlan, "in-context plan for '" + tp.task + "' is invalid");
      req.icl_examples.push_back({tp.task, std::move(*tp.plan)});
    }
  }
  const auto url = a.url.empty() ? env_or("FALCONER_PLANNER_URL") : a.url;
  if (url.empty()) throw Error(ErrorCode::InvalidArgument, "no planner URL (--planner-url or FALCONER_PLANNER_URL)");
  OpenAiChatClient chat(url, a.model, env_or("FALCONER_API_KEY"));
  progress("requesting plan from " + url);
  const auto outcome = request_plan(chat, req, a.repairs);
  for (const auto& r : outcome.repair_log) progress("repair round: " + r);
  write_file(a.out, to_json(outcome.plan).dump(2) + "\n");
  Summary s{"plan", {a.out}};
  s.extra = {{"plan_id", plan_digest(outcome.plan)}, {"rounds", outcome.rounds}};
  return s;
}

// --- validate ---------------------------------------------------------------

int cmd_validate(const std::string& path, const Globals& g) {
  std::optional<ValidationReport> report;
  std::string schema_error;
  try {
    report = validate_plan(parse_plan(read_file(path)));
  } catch (const SchemaError& e) {
    schema_error = e.path() + " " + e.reason();
  }
  const bool ok = report && report->ok();
  if (g.json_out) {
    json out = {{"status", ok ? "ok" : "invalid"}, {"command", "validate"}, {"artifacts", json::array()}};
    if (report) out["report"] = report->to_json();
    else out["schema_error"] = schema_error;
    std::cout << out.dump() << "\n";
  } else if (report) {
    std::cout << (ok ? "valid\n" : report->to_text());
  } else {
    std::cout << "schema error: " << schema_error << "\n";
  }
  return ok ? kOk : kValidation;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  std::string plan, corpus, backend, label_backend, span_backend, out;
  std::size_t batch = 0, parallel = 1;
  bool cache = false, strict = false, timing = false;
};

Summary cmd_run(const RunArgs& a, const Globals& g) {
  const auto plan = parse_plan(read_file(a.plan));
  const auto corpus = load_corpus(a.corpus);
  const auto label_spec = a.label_backend.empty() ? a.backend : a.label_backend;
  const auto span_spec = a.span_backend.empty() ? a.backend : a.span_backend;

  // Unbound kinds are fine for plans without such nodes; execute reports the rest.
  std::unique_ptr<Backend> label, span;
  if (!label_spec.empty()) label = open_backend(label_spec, g, a.cache);
  if (!span_spec.empty() && span_spec != label_spec) span = open_backend(span_spec, g, a.cache);
  Backend* span_ptr = span ? span.get() : (span_spec.empty() ? nullptr : label.get());

  progress("running plan over " + std::to_string(corpus.size()) + " records");
  const auto [results, cost] =
      execute(plan, corpus, {label.get(), span_ptr}, {a.batch, a.parallel, a.cache, a.strict});

  const fs::path out(a.out);
  const auto results_path = (out / "results.jsonl").string();
  const auto report_path = (out / "report.json").string();
  write_file(results_path, serialize_results(results, cost));
  json report = cost.to_json(a.timing);
  report["seed"] = g.seed;
  report["rows"] = results.rows.size();
  report["dropped"] = results.dropped.size();
  write_file(report_path, report.dump(2) + "\n");
  progress(std::to_string(results.rows.size()) + " rows, " + std::to_string(results.dropped.size()) + " dropped");

  Summary s{"run", {results_path, report_path}};
  s.extra = json{{"plan_id", results.plan_id}, {"rows", results.rows.size()}, {"dropped", results.dropped.size()}};
  return s;
}

// --- generate / degrade -----------------------------------------------------

struct GenerateArgs {
  std::string mode, corpus, label, instruction, backend, out, plan;
  std::size_t n = 64, batch = 0, parallel = 1;
  bool cache = false;
};

Summary cmd_generate(const GenerateArgs& a, const Globals& g) {
  const auto corpus = load_corpus(a.corpus);
  auto backend = open_backend(a.backend, g, a.cache);
  const DispatchOptions dispatch{a.parallel, a.cache, a.batch};

  TrainingSet set;
  if (a.mode == "classification") {
    progress("scoring " + std::to_string(corpus.size()) + " records for '" + a.label + "'");
    set = generate_classification_set(corpus, a.label, a.n, *backend, dispatch);
  } else {
    const auto sub = derive_seed(g.seed, "sample");
    progress("annotating " + std::to_string(a.n) + " sampled records");
    set = generate_extraction_set(corpus, a.instruction, a.n, sub, *backend, dispatch);
  }
  set.provenance.notes.push_back("cli seed=" + std::to_string(g.seed));
  if (!a.plan.empty()) set.provenance.plan_id = plan_digest(parse_plan(read_file(a.plan)));
  for (const auto& note : set.provenance.notes) {
    if (note.starts_with("warning")) progress(note);
  }

  const auto manifest = emit_dataset(set, a.out);
  const fs::path out(a.out);
  Summary s{"generate", {(out / dataset_file_name(set.kind)).string(), (out / "manifest.json").string()}};
  s.extra = {{"digest", manifest.at("digest")}, {"counts", manifest.at("counts")}};
  return s;
}

Summary cmd_degrade(const std::string& in, const std::string& out, const Globals& g) {
  const auto set = load_dataset(in);
  const auto sub = derive_seed(g.seed, "degrade");
  auto degraded = degrade_spans(set, sub);
  degraded.provenance.notes.push_back("cli seed=" + std::to_string(g.seed));
  const auto manifest = emit_dataset(degraded, out);
  Summary s{"degrade", {(fs::path(out) / dataset_file_name(degraded.kind)).string(), (fs::path(out) / "manifest.json").string()}};
  s.extra = {{"digest", manifest.at("digest")}};
  return s;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string mode = "consistency", corpus, pred, gold, field = "spans", out;
};

// Span sets from results.jsonl rows (field `field`) or dataset-style lines with top-level "spans".
std::vector<SpanSet> read_span_sets(const std::string& path, const std::string& field) {
  std::vector<SpanSet> out;
  std::istringstream lines(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw MalformedLine(line_no, "invalid JSON in " + path);
    }
    if (!j.contains("id")) continue;  // results trailer
    SpanSet s;
    s.record_id = j.at("id").get<std::string>();
    if (j.contains("fields") && j.at("fields").contains(field)) s.spans = spans_from_json(j.at("fields").at(field));
    else if (j.contains("spans")) s.spans = spans_from_json(j.at("spans"));
    out.push_back(std::move(s));
  }
  return out;
}

Summary cmd_eval(const EvalArgs& a) {
  const auto corpus = load_corpus(a.corpus);
  EvalReport report;
  if (a.mode == "consistency") {
    report = consistency(parse_results(read_file(a.pred)), parse_results(read_file(a.gold)), corpus);
  } else {
    report = word_f1(read_span_sets(a.pred, a.field), read_span_sets(a.gold, a.field), corpus);
  }
  const fs::path out(a.out);
  const auto json_path = (out / "report.json").string();
  const auto md_path = (out / "report.md").string();
  write_file(json_path, render_report(report, ReportFormat::Json) + "\n");
  write_file(md_path, render_report(report, ReportFormat::Markdown));
  if (!a.out.empty()) progress("overall f1 " + format_3dp(report.overall.f1));
  Summary s{"eval", {json_path, md_path}};
  s.extra = {{"overall_f1", report.overall.f1}};
  if (report.overall.accuracy) s.extra["overall_accuracy"] = *report.overall.accuracy;
  return s;
}

// --- score-plans ------------------------------------------------------------

struct ScoreArgs {
  std::string candidates, golden, probe, backend, out;
};

Summary cmd_score_plans(const ScoreArgs& a, const Globals& g) {
  std::map<std::string, Plan> golden;
  for (auto& tp : load_task_plans(a.golden)) {
    if (!tp.plan) throw Error(ErrorCode::InvalidArgument, "golden entry '" + tp.task + "' has no plan");
    golden.emplace(tp.task, std::move(*tp.plan));
  }
  const auto candidates = load_task_plans(a.candidates);
  const auto probe = load_corpus(a.probe);
  auto backend = open_backend(a.backend, g, false);
  const auto score = score_planning(candidates, golden, probe, *backend);
  const auto path = (fs::path(a.out) / "score.json").string();
  write_file(path, score.to_json().dump(2) + "\n");
  progress("planning score " + format_3dp(score.score) + " (" + std::to_string(score.correct) + "/" +
           std::to_string(score.total) + ")");
  Summary s{"score-plans", {path}};
  s.extra = {{"score", score.score}, {"correct", score.correct}, {"total", score.total}};
  return s;
}

void print_summary(const Summary& s, const Globals& g) {
  if (!g.json_out) {
    for (const auto& a : s.artifacts) std::cout << a << "\n";
    return;
  }
  json out = s.extra;
  out["status"] = "ok";
  out["command"] = s.command;
  out["artifacts"] = s.artifacts;
  out["seed"] = g.seed;
  std::cout << out.dump() << "\n";
}

int report_error(const std::string& command, const std::string& message, int code, const Globals& g) {
  std::cerr << "falconer: error: " << message << "\n";
  if (g.json_out) {
    std::cout << json{{"status", "error"}, {"command", command}, {"error", message}, {"exit_code", code},
                      {"artifacts", json::array()}}
                     .dump()
              << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"falconer: instruction-driven extraction pipelines"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file mirroring the command-line flags");

  Globals g;
  app.add_flag("--json", g.json_out, "Print a JSON summary on stdout");
  app.add_option("--seed", g.seed, "Root seed for every random choice")->capture_default_str();
  g.cache_dir = env_or("FALCONER_CACHE_DIR");
  app.add_option("--cache-dir", g.cache_dir, "Result cache directory (FALCONER_CACHE_DIR)");

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Ask the planner endpoint for a plan");
  plan->add_option("--task", plan_args.task, "Task instruction")->required();
  plan->add_option("--out", plan_args.out, "Plan file to write")->required();
  plan->add_option("--icl-dir", plan_args.icl_dir, "Directory of in-context {task, plan} files")
      ->check(CLI::ExistingDirectory);
  plan->add_option("--planner-url", plan_args.url, "Planner base URL (FALCONER_PLANNER_URL)");
  plan->add_option("--model", plan_args.model, "Planner model")->capture_default_str();
  plan->add_option("--repairs", plan_args.repairs, "Repair rounds")->capture_default_str();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Validate a plan file");
  validate->add_option("plan", validate_path, "Plan file")->required()->check(CLI::ExistingFile);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Execute a plan over a corpus");
  run->add_option("--plan", run_args.plan, "Plan file")->required()->check(CLI::ExistingFile);
  run->add_option("--corpus", run_args.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  run->add_option("--backend", run_args.backend, "Backend for every primitive (mock:<rules>, proxy[:url], annotator[:url][#model])");
  run->add_option("--label-backend", run_args.label_backend, "Backend for Label nodes");
  run->add_option("--span-backend", run_args.span_backend, "Backend for Span nodes");
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--batch", run_args.batch, "Items per backend call (0: backend maximum)");
  run->add_option("--parallel", run_args.parallel, "Concurrent backend calls")->check(CLI::PositiveNumber);
  run->add_flag("--cache", run_args.cache, "Reuse cached backend results");
  run->add_flag("--strict", run_args.strict, "Fail on the first backend item error");
  run->add_flag("--timing", run_args.timing, "Record wall time in report.json");

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "Build a training dataset");
  gen->add_option("--mode", gen_args.mode, "classification or extraction")
      ->required()
      ->check(CLI::IsMember({"classification", "extraction"}));
  gen->add_option("--corpus", gen_args.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  gen->add_option("--label", gen_args.label, "Classification label");
  gen->add_option("--instruction", gen_args.instruction, "Extraction instruction");
  gen->add_option("--n", gen_args.n, "Examples per class, or records to annotate")->capture_default_str();
  gen->add_option("--backend", gen_args.backend, "Scoring or annotating backend")->required();
  gen->add_option("--out", gen_args.out, "Dataset directory")->required();
  gen->add_option("--plan", gen_args.plan, "Plan the dataset serves (recorded in provenance)")->check(CLI::ExistingFile);
  gen->add_option("--batch", gen_args.batch, "Items per backend call");
  gen->add_option("--parallel", gen_args.parallel, "Concurrent backend calls")->check(CLI::PositiveNumber);
  gen->add_flag("--cache", gen_args.cache, "Reuse cached backend results");

  std::string degrade_in, degrade_out;
  auto* degrade = app.add_subcommand("degrade", "Randomize span starts of an extraction dataset");
  degrade->add_option("--in", degrade_in, "Extraction dataset directory")->required()->check(CLI::ExistingDirectory);
  degrade->add_option("--out", degrade_out, "Output dataset directory")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score predictions against gold or a reference run");
  eval->add_option("--mode", eval_args.mode, "consistency (two results.jsonl) or f1 (span files)")
      ->check(CLI::IsMember({"consistency", "f1"}))
      ->capture_default_str();
  eval->add_option("--corpus", eval_args.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", eval_args.pred, "Predicted run or spans")->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", eval_args.gold, "Reference run or spans")->required()->check(CLI::ExistingFile);
  eval->add_option("--field", eval_args.field, "Span field to read from results rows")->capture_default_str();
  eval->add_option("--out", eval_args.out, "Report directory")->required();

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score-plans", "Score candidate plans against golden plans");
  score->add_option("--candidates", score_args.candidates, "Directory of candidate {task, plan} files")
      ->required()
      ->check(CLI::ExistingDirectory);
  score->add_option("--golden", score_args.golden, "Directory of golden {task, plan} files")
      ->required()
      ->check(CLI::ExistingDirectory);
  score->add_option("--probe", score_args.probe, "Probe corpus JSONL")->required()->check(CLI::ExistingFile);
  score->add_option("--backend", score_args.backend, "Mock backend (mock:<rules>)")->required();
  score->add_option("--out", score_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgs;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (validate->parsed()) return cmd_validate(validate_path, g);

    Summary s;
    if (plan->parsed()) {
      s = cmd_plan(plan_args);
    } else if (run->parsed()) {
      s = cmd_run(run_args, g);
    } else if (gen->parsed()) {
      if (gen_args.mode == "classification" && gen_args.label.empty()) {
        return report_error(command, "--label is required for classification", kBadArgs, g);
      }
      if (gen_args.mode == "extraction" && gen_args.instruction.empty()) {
        return report_error(command, "--instruction is required for extraction", kBadArgs, g);
      }
      s = cmd_generate(gen_args, g);
    } else if (degrade->parsed()) {
      s = cmd_degrade(degrade_in, degrade_out, g);
    } else if (eval->parsed()) {
      s = cmd_eval(eval_args);
    } else {
      s = cmd_score_plans(score_args, g);
    }
    print_summary(s, g);
    return kOk;
  } catch (const Error& e) {
    return report_error(command, e.what(), exit_code(e.code()), g);
  } catch (const std::exception& e) {
    return report_error(command, e.what(), kInternal, g);
  }
}
