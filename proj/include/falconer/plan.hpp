#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace falconer {

inline constexpr std::string_view kPlanVersion = "plan-v1";

enum class NodeKind { Source, Label, Span, Bool, Filter, Output };
enum class BoolOp { And, Or, Not };

/// What a node yields per record.
enum class ValueType { Records, Boolean, SpanSet, None };

std::string_view to_string(NodeKind kind);
std::string_view to_string(BoolOp op);
std::string_view to_string(ValueType type);
ValueType value_type(NodeKind kind);

/// Prompt text with `{slot}` placeholders. Each slot is bound to an upstream
/// Span node; at run time it takes the first span of that node for the record.
struct InstructionTemplate {
  std::string text;
  std::map<std::string, std::string> bindings;

  /// Placeholder names in order of first appearance.
  std::vector<std::string> slots() const;
  std::string render(const std::map<std::string, std::string>& values) const;

  bool operator==(const InstructionTemplate&) const = default;
};

struct OutputField {
  std::string name;
  std::string node;

  bool operator==(const OutputField&) const = default;
};

struct PlanNode {
  std::string id;
  NodeKind kind = NodeKind::Source;
  InstructionTemplate instruction;  // Label, Span
  std::string input;                // Label, Span, Filter; optional on Output
  BoolOp op = BoolOp::And;          // Bool
  std::vector<std::string> inputs;  // Bool
  std::string predicate;            // Filter
  std::vector<OutputField> fields;  // Output

  /// Ids this node reads from, in payload order (may repeat).
  std::vector<std::string> dependencies() const;

  bool operator==(const PlanNode&) const = default;
};

struct Plan {
  std::string version{kPlanVersion};
  std::vector<PlanNode> nodes;
  std::string output;
  std::optional<std::string> provenance;

  const PlanNode* find(std::string_view id) const;

  bool operator==(const Plan&) const = default;
};

/// Structural parse only; throws SchemaError with a JSON-pointer path.
Plan parse_plan(std::string_view document);
Plan parse_plan(const nlohmann::json& document);
inline Plan parse_plan(const std::string& document) { return parse_plan(std::string_view(document)); }
inline Plan parse_plan(const char* document) { return parse_plan(std::string_view(document)); }

nlohmann::json to_json(const Plan& plan, bool include_provenance = true);
nlohmann::json to_json(const PlanNode& node, bool include_id = true);

enum class IssueKind {
  DuplicateId,
  DanglingRef,
  Cycle,
  TypeMismatch,
  BadArity,
  UnboundSlot,
  UnusedBinding,
  EmptyInstruction,
  MissingSource,
  MultipleSources,
  MissingSink,
  MultipleSinks,
  OutputMismatch,
  BadField,
};

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::string node;
  std::vector<std::string> cycle;  // Cycle only, in declaration order
  std::string expected;            // TypeMismatch only
  std::string found;               // TypeMismatch only
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
  bool contains(IssueKind kind) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Collects every violation; an empty report means the plan is executable.
ValidationReport validate_plan(const Plan& plan);

/// Renames ids to n0..nk in a canonical topological order, sorts And/Or
/// inputs and output fields, drops provenance. Throws InvalidPlan.
Plan canonicalize(const Plan& plan);

/// Compact serialization of canonicalize(plan) with sorted keys.
std::string canonical_bytes(const Plan& plan);

/// SHA-256 of canonical_bytes.
std::string plan_digest(const Plan& plan);

/// Source -> Label -> Filter -> Span -> Output.
Plan make_filter_extract(std::string_view label_instruction, std::string_view span_instruction);

/// Node ids in a topological order (dependencies first). Requires an acyclic plan.
std::vector<std::string> topological_order(const Plan& plan);

}  // namespace falconer
