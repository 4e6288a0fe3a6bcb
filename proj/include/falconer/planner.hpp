#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "falconer/backends.hpp"
#include "falconer/corpus.hpp"
#include "falconer/plan.hpp"

namespace falconer {

struct IclExample {
  std::string task;
  Plan plan;
};

struct PlannerRequest {
  std::string task;
  std::vector<IclExample> icl_examples;
  std::string model;
};

/// The full prompt: schema, primitive signatures, task, then ICL pairs with
/// canonical plan JSON. A pure function of the request.
std::string build_planner_prompt(const PlannerRequest& request);

/// First JSON object in the reply, parsed and validated. Throws NoJsonFound,
/// or PlanInvalidAfterRepairs carrying the validation report.
Plan parse_planner_response(std::string_view reply);

struct PlannerOutcome {
  Plan plan;
  std::size_t rounds = 0;                 // chat calls made
  std::vector<std::string> repair_log;    // feedback sent back, one per repair round
};

/// Asks the chat endpoint for a plan, re-prompting with the validation report
/// up to `repairs` times.
PlannerOutcome request_plan(ChatClient& chat, const PlannerRequest& request, std::size_t repairs = 2);

/// A task with either a plan or the reason none was produced.
struct TaskPlan {
  std::string task;
  std::optional<Plan> plan;
  std::string failure;
};

struct PlanningFailure {
  std::string task;
  std::string kind;  // no_plan, invalid, execution_error, behavior_mismatch

  bool operator==(const PlanningFailure&) const = default;
};

struct PlanningScore {
  std::size_t total = 0;
  std::size_t correct = 0;
  double score = 0.0;
  std::vector<PlanningFailure> failures;

  nlohmann::json to_json() const;
};

/// A candidate is correct when it validates and, run on the probe with the
/// same backend, yields the same rows and dropped records as the golden plan.
PlanningScore score_planning(const std::vector<TaskPlan>& candidates, const std::map<std::string, Plan>& golden,
                             const Corpus& probe, Backend& backend);

/// Reads every *.json file in `dir` (sorted by name). Each holds
/// {"task": "...", "plan": {...}} or {"task": "...", "plan": null, "failure": "..."}.
std::vector<TaskPlan> load_task_plans(const std::filesystem::path& dir);

}  // namespace falconer
