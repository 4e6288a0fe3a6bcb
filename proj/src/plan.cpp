#include "falconer/plan.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "falconer/digest.hpp"
#include "falconer/error.hpp"

namespace falconer {

using nlohmann::json;

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Source: return "Source";
    case NodeKind::Label: return "Label";
    case NodeKind::Span: return "Span";
    case NodeKind::Bool: return "Bool";
    case NodeKind::Filter: return "Filter";
    case NodeKind::Output: return "Output";
  }
  return "?";
}

std::string_view to_string(BoolOp op) {
  switch (op) {
    case BoolOp::And: return "And";
    case BoolOp::Or: return "Or";
    case BoolOp::Not: return "Not";
  }
  return "?";
}

std::string_view to_string(ValueType type) {
  switch (type) {
    case ValueType::Records: return "records";
    case ValueType::Boolean: return "boolean";
    case ValueType::SpanSet: return "spanset";
    case ValueType::None: return "none";
  }
  return "?";
}

ValueType value_type(NodeKind kind) {
  switch (kind) {
    case NodeKind::Source:
    case NodeKind::Filter: return ValueType::Records;
    case NodeKind::Label:
    case NodeKind::Bool: return ValueType::Boolean;
    case NodeKind::Span: return ValueType::SpanSet;
    case NodeKind::Output: return ValueType::None;
  }
  return ValueType::None;
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::DuplicateId: return "DuplicateId";
    case IssueKind::DanglingRef: return "DanglingRef";
    case IssueKind::Cycle: return "Cycle";
    case IssueKind::TypeMismatch: return "TypeMismatch";
    case IssueKind::BadArity: return "BadArity";
    case IssueKind::UnboundSlot: return "UnboundSlot";
    case IssueKind::UnusedBinding: return "UnusedBinding";
    case IssueKind::EmptyInstruction: return "EmptyInstruction";
    case IssueKind::MissingSource: return "MissingSource";
    case IssueKind::MultipleSources: return "MultipleSources";
    case IssueKind::MissingSink: return "MissingSink";
    case IssueKind::MultipleSinks: return "MultipleSinks";
    case IssueKind::OutputMismatch: return "OutputMismatch";
    case IssueKind::BadField: return "BadField";
  }
  return "?";
}

// --- InstructionTemplate ---------------------------------------------------

namespace {

bool slot_char(char c, bool first) {
  const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  return first ? alpha : alpha || (c >= '0' && c <= '9');
}

// Calls on_literal / on_slot for each piece of the template.
void scan_template(std::string_view text, const std::function<void(std::string_view)>& on_literal,
                   const std::function<void(std::string_view)>& on_slot) {
  std::size_t i = 0;
  std::size_t lit = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && slot_char(text[j], j == i + 1)) ++j;
      if (j > i + 1 && j < text.size() && text[j] == '}') {
        on_literal(text.substr(lit, i - lit));
        on_slot(text.substr(i + 1, j - i - 1));
        i = j + 1;
        lit = i;
        continue;
      }
    }
    ++i;
  }
  on_literal(text.substr(lit));
}

}  // namespace

std::vector<std::string> InstructionTemplate::slots() const {
  std::vector<std::string> out;
  scan_template(
      text, [](std::string_view) {},
      [&](std::string_view slot) {
        if (std::find(out.begin(), out.end(), slot) == out.end()) out.emplace_back(slot);
      });
  return out;
}

std::string InstructionTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  scan_template(
      text, [&](std::string_view lit) { out += lit; },
      [&](std::string_view slot) {
        const auto it = values.find(std::string(slot));
        if (it == values.end()) throw Error(ErrorCode::InvalidPlan, "no value for slot {" + std::string(slot) + "}");
        out += it->second;
      });
  return out;
}

std::vector<std::string> PlanNode::dependencies() const {
  std::vector<std::string> deps;
  switch (kind) {
    case NodeKind::Source: break;
    case NodeKind::Label:
    case NodeKind::Span:
      deps.push_back(input);
      for (const auto& [slot, node] : instruction.bindings) deps.push_back(node);
      break;
    case NodeKind::Bool: deps = inputs; break;
    case NodeKind::Filter:
      deps.push_back(predicate);
      deps.push_back(input);
      break;
    case NodeKind::Output:
      for (const auto& f : fields) deps.push_back(f.node);
      if (!input.empty()) deps.push_back(input);
      break;
  }
  return deps;
}

const PlanNode* Plan::find(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

// --- parsing ----------------------------------------------------------------

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "/" + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key, "expected string");
  return v.get<std::string>();
}

NodeKind parse_kind(const std::string& s, const std::string& path) {
  static const std::map<std::string, NodeKind, std::less<>> kinds{
      {"Source", NodeKind::Source}, {"Label", NodeKind::Label},   {"Span", NodeKind::Span},
      {"Bool", NodeKind::Bool},     {"Filter", NodeKind::Filter}, {"Output", NodeKind::Output}};
  const auto it = kinds.find(s);
  if (it == kinds.end()) throw SchemaError(path, "unknown kind");
  return it->second;
}

InstructionTemplate parse_instruction(const json& v, const std::string& path) {
  InstructionTemplate t;
  if (v.is_string()) {
    t.text = v.get<std::string>();
    return t;
  }
  if (!v.is_object()) throw SchemaError(path, "expected string or object");
  t.text = require_string(v, "template", path);
  if (const auto it = v.find("bindings"); it != v.end()) {
    if (!it->is_object()) throw SchemaError(path + "/bindings", "expected object");
    for (const auto& [slot, node] : it->items()) {
      if (!node.is_string()) throw SchemaError(path + "/bindings/" + slot, "expected string");
      t.bindings.emplace(slot, node.get<std::string>());
    }
  }
  return t;
}

PlanNode parse_node(const json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError(path, "expected object");
  PlanNode node;
  node.id = require_string(v, "id", path);
  if (node.id.empty()) throw SchemaError(path + "/id", "empty id");
  node.kind = parse_kind(require_string(v, "kind", path), path + "/kind");
  switch (node.kind) {
    case NodeKind::Source: break;
    case NodeKind::Label:
    case NodeKind::Span:
      node.instruction = parse_instruction(require(v, "instruction", path), path + "/instruction");
      node.input = require_string(v, "input", path);
      break;
    case NodeKind::Bool: {
      const auto op = require_string(v, "op", path);
      if (op == "And") node.op = BoolOp::And;
      else if (op == "Or") node.op = BoolOp::Or;
      else if (op == "Not") node.op = BoolOp::Not;
      else throw SchemaError(path + "/op", "unknown op");
      const auto& inputs = require(v, "inputs", path);
      if (!inputs.is_array()) throw SchemaError(path + "/inputs", "expected array");
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].is_string()) throw SchemaError(path + "/inputs/" + std::to_string(i), "expected string");
        node.inputs.push_back(inputs[i].get<std::string>());
      }
      break;
    }
    case NodeKind::Filter:
      node.predicate = require_string(v, "predicate", path);
      node.input = require_string(v, "input", path);
      break;
    case NodeKind::Output: {
      const auto& fields = require(v, "fields", path);
      if (!fields.is_array()) throw SchemaError(path + "/fields", "expected array");
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto fpath = path + "/fields/" + std::to_string(i);
        if (!fields[i].is_object()) throw SchemaError(fpath, "expected object");
        node.fields.push_back({require_string(fields[i], "name", fpath), require_string(fields[i], "node", fpath)});
      }
      if (v.contains("input")) node.input = require_string(v, "input", path);
      break;
    }
  }
  return node;
}

}  // namespace

Plan parse_plan(const json& doc) {
  if (!doc.is_object()) throw SchemaError("", "expected object");
  Plan plan;
  plan.version = require_string(doc, "version", "");
  if (plan.version != kPlanVersion) throw SchemaError("/version", "unsupported version");
  const auto& nodes = require(doc, "nodes", "");
  if (!nodes.is_array()) throw SchemaError("/nodes", "expected array");
  for (std::size_t i = 0; i < nodes.size(); ++i) plan.nodes.push_back(parse_node(nodes[i], "/nodes/" + std::to_string(i)));
  plan.output = require_string(doc, "output", "");
  if (const auto it = doc.find("provenance"); it != doc.end() && !it->is_null()) {
    plan.provenance = it->is_string() ? it->get<std::string>() : it->dump();
  }
  return plan;
}

Plan parse_plan(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_plan(doc);
}

json to_json(const PlanNode& node, bool include_id) {
  json j;
  if (include_id) j["id"] = node.id;
  j["kind"] = to_string(node.kind);
  switch (node.kind) {
    case NodeKind::Source: break;
    case NodeKind::Label:
    case NodeKind::Span:
      j["instruction"] = {{"template", node.instruction.text}, {"bindings", json::object()}};
      for (const auto& [slot, id] : node.instruction.bindings) j["instruction"]["bindings"][slot] = id;
      j["input"] = node.input;
      break;
    case NodeKind::Bool:
      j["op"] = to_string(node.op);
      j["inputs"] = node.inputs;
      break;
    case NodeKind::Filter:
      j["predicate"] = node.predicate;
      j["input"] = node.input;
      break;
    case NodeKind::Output:
      j["fields"] = json::array();
      for (const auto& f : node.fields) j["fields"].push_back({{"name", f.name}, {"node", f.node}});
      if (!node.input.empty()) j["input"] = node.input;
      break;
  }
  return j;
}

json to_json(const Plan& plan, bool include_provenance) {
  json j;
  j["version"] = plan.version;
  j["nodes"] = json::array();
  for (const auto& n : plan.nodes) j["nodes"].push_back(to_json(n));
  j["output"] = plan.output;
  if (include_provenance && plan.provenance) j["provenance"] = *plan.provenance;
  return j;
}

// --- validation -------------------------------------------------------------

bool ValidationReport::contains(IssueKind kind) const {
  return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.kind == kind; });
}

json ValidationReport::to_json() const {
  json arr = json::array();
  for (const auto& i : issues) {
    json j{{"kind", to_string(i.kind)}, {"node", i.node}, {"detail", i.detail}};
    if (!i.cycle.empty()) j["cycle"] = i.cycle;
    if (!i.expected.empty()) {
      j["expected"] = i.expected;
      j["found"] = i.found;
    }
    arr.push_back(std::move(j));
  }
  return {{"ok", ok()}, {"issues", arr}};
}

std::string ValidationReport::to_text() const {
  if (ok()) return "plan is valid\n";
  std::ostringstream out;
  for (const auto& i : issues) {
    out << to_string(i.kind);
    if (!i.node.empty()) out << " [" << i.node << "]";
    out << ": " << i.detail << "\n";
  }
  return out.str();
}

namespace {

class Validator {
 public:
  explicit Validator(const Plan& plan) : plan_(plan) {
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
      const auto& id = plan.nodes[i].id;
      if (!index_.emplace(id, i).second) add(IssueKind::DuplicateId, id, "id '" + id + "' declared more than once");
    }
  }

  ValidationReport run() {
    check_endpoints();
    for (const auto& node : plan_.nodes) check_node(node);
    check_cycles();
    return std::move(report_);
  }

 private:
  void add(IssueKind kind, const std::string& node, std::string detail) {
    report_.issues.push_back({kind, node, {}, {}, {}, std::move(detail)});
  }

  const PlanNode* lookup(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &plan_.nodes[it->second];
  }

  // Checks that `ref` exists and yields `expected`; ValueType::None means "anything but Output".
  void expect(const PlanNode& node, const std::string& role, const std::string& ref, ValueType expected) {
    const PlanNode* target = lookup(ref);
    if (target == nullptr) {
      add(IssueKind::DanglingRef, node.id, role + " references unknown node '" + ref + "'");
      return;
    }
    const auto found = value_type(target->kind);
    const bool ok = expected == ValueType::None ? found != ValueType::None : found == expected;
    if (!ok) {
      ValidationIssue issue{IssueKind::TypeMismatch, node.id, {}, {}, {}, {}};
      issue.expected = expected == ValueType::None ? "value" : std::string(to_string(expected));
      issue.found = found == ValueType::None ? "output" : std::string(to_string(found));
      issue.detail = role + " '" + ref + "' yields " + issue.found + ", expected " + issue.expected;
      report_.issues.push_back(std::move(issue));
    }
  }

  void check_endpoints() {
    std::vector<std::string> sources, sinks;
    for (const auto& n : plan_.nodes) {
      if (n.kind == NodeKind::Source) sources.push_back(n.id);
      if (n.kind == NodeKind::Output) sinks.push_back(n.id);
    }
    if (sources.empty()) add(IssueKind::MissingSource, "", "plan has no Source node");
    if (sources.size() > 1) add(IssueKind::MultipleSources, sources[1], std::to_string(sources.size()) + " Source nodes");
    if (sinks.empty()) add(IssueKind::MissingSink, "", "plan has no Output node");
    if (sinks.size() > 1) add(IssueKind::MultipleSinks, sinks[1], std::to_string(sinks.size()) + " Output nodes");
    const PlanNode* out = lookup(plan_.output);
    if (out == nullptr || out->kind != NodeKind::Output) {
      add(IssueKind::OutputMismatch, plan_.output, "plan output '" + plan_.output + "' is not an Output node");
    }
  }

  void check_instruction(const PlanNode& node) {
    const auto& tpl = node.instruction;
    if (tpl.text.empty()) add(IssueKind::EmptyInstruction, node.id, "instruction template is empty");
    const auto slots = tpl.slots();
    for (const auto& slot : slots) {
      if (!tpl.bindings.contains(slot)) add(IssueKind::UnboundSlot, node.id, "placeholder {" + slot + "} has no binding");
    }
    for (const auto& [slot, ref] : tpl.bindings) {
      if (std::find(slots.begin(), slots.end(), slot) == slots.end()) {
        add(IssueKind::UnusedBinding, node.id, "binding '" + slot + "' has no placeholder");
      }
      expect(node, "binding {" + slot + "}", ref, ValueType::SpanSet);
    }
  }

  void check_node(const PlanNode& node) {
    switch (node.kind) {
      case NodeKind::Source: break;
      case NodeKind::Label:
      case NodeKind::Span:
        expect(node, "input", node.input, ValueType::Records);
        check_instruction(node);
        break;
      case NodeKind::Bool: {
        const auto n = node.inputs.size();
        if (node.op == BoolOp::Not && n != 1) add(IssueKind::BadArity, node.id, "Not takes exactly 1 input, got " + std::to_string(n));
        if (node.op != BoolOp::Not && n < 2) {
          add(IssueKind::BadArity, node.id, std::string(to_string(node.op)) + " takes at least 2 inputs, got " + std::to_string(n));
        }
        for (const auto& in : node.inputs) expect(node, "input", in, ValueType::Boolean);
        break;
      }
      case NodeKind::Filter:
        expect(node, "predicate", node.predicate, ValueType::Boolean);
        expect(node, "input", node.input, ValueType::Records);
        break;
      case NodeKind::Output: {
        if (node.fields.empty()) add(IssueKind::BadField, node.id, "Output has no fields");
        std::set<std::string> names;
        for (const auto& f : node.fields) {
          if (f.name.empty()) add(IssueKind::BadField, node.id, "field with empty name");
          else if (!names.insert(f.name).second) add(IssueKind::BadField, node.id, "duplicate field '" + f.name + "'");
          expect(node, "field '" + f.name + "'", f.node, ValueType::None);
        }
        if (!node.input.empty()) expect(node, "input", node.input, ValueType::Records);
        break;
      }
    }
  }

  // Tarjan SCC; every component with >1 member (or a self edge) is a cycle.
  void check_cycles() {
    const auto n = plan_.nodes.size();
    std::vector<std::vector<std::size_t>> deps(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& ref : plan_.nodes[i].dependencies()) {
        if (const auto it = index_.find(ref); it != index_.end()) deps[i].push_back(it->second);
      }
    }
    std::vector<int> order(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    int counter = 0;

    std::function<void(std::size_t)> visit = [&](std::size_t v) {
      order[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      for (auto w : deps[v]) {
        if (order[w] < 0) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], order[w]);
        }
      }
      if (low[v] != order[v]) return;
      std::vector<std::size_t> component;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component.push_back(w);
      } while (w != v);
      const bool self_loop = std::find(deps[v].begin(), deps[v].end(), v) != deps[v].end();
      if (component.size() > 1 || self_loop) {
        std::sort(component.begin(), component.end());
        ValidationIssue issue{IssueKind::Cycle, plan_.nodes[component.front()].id, {}, {}, {}, "cycle through"};
        for (auto c : component) {
          issue.cycle.push_back(plan_.nodes[c].id);
          issue.detail += " " + plan_.nodes[c].id;
        }
        report_.issues.push_back(std::move(issue));
      }
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (order[i] < 0) visit(i);
    }
  }

  const Plan& plan_;
  std::unordered_map<std::string, std::size_t> index_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate_plan(const Plan& plan) { return Validator(plan).run(); }

std::vector<std::string> topological_order(const Plan& plan) {
  std::unordered_map<std::string, std::size_t> pending;
  std::unordered_map<std::string, std::vector<std::string>> dependents;
  for (const auto& n : plan.nodes) {
    std::set<std::string> deps;
    for (const auto& d : n.dependencies()) deps.insert(d);
    pending[n.id] = deps.size();
    for (const auto& d : deps) dependents[d].push_back(n.id);
  }
  std::vector<std::string> order;
  std::vector<std::string> ready;
  for (const auto& n : plan.nodes) {
    if (pending[n.id] == 0) ready.push_back(n.id);
  }
  while (!ready.empty()) {
    auto id = ready.front();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& d : dependents[id]) {
      if (--pending[d] == 0) ready.push_back(d);
    }
  }
  if (order.size() != plan.nodes.size()) throw Error(ErrorCode::InvalidPlan, "plan has a cycle");
  return order;
}

// --- canonicalization -------------------------------------------------------

namespace {

// Payload of `node` with references rewritten through `names`, And/Or inputs
// and output fields sorted. All references must already be renamed.
PlanNode rename(const PlanNode& node, const std::unordered_map<std::string, std::string>& names) {
  PlanNode out = node;
  auto ren = [&](const std::string& id) { return names.at(id); };
  switch (node.kind) {
    case NodeKind::Source: break;
    case NodeKind::Label:
    case NodeKind::Span:
      out.input = ren(node.input);
      for (auto& [slot, ref] : out.instruction.bindings) ref = ren(ref);
      break;
    case NodeKind::Bool:
      for (auto& in : out.inputs) in = ren(in);
      if (node.op != BoolOp::Not) {
        // Numeric order of the nK suffix, so n2 sorts before n10.
        std::sort(out.inputs.begin(), out.inputs.end(), [](const std::string& a, const std::string& b) {
          return std::make_pair(a.size(), a) < std::make_pair(b.size(), b);
        });
      }
      break;
    case NodeKind::Filter:
      out.predicate = ren(node.predicate);
      out.input = ren(node.input);
      break;
    case NodeKind::Output:
      for (auto& f : out.fields) f.node = ren(f.node);
      std::sort(out.fields.begin(), out.fields.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
      if (!node.input.empty()) out.input = ren(node.input);
      break;
  }
  return out;
}

}  // namespace

Plan canonicalize(const Plan& plan) {
  const auto report = validate_plan(plan);
  if (!report.ok()) throw Error(ErrorCode::InvalidPlan, report.to_text());

  std::unordered_map<std::string, std::size_t> pending;
  std::unordered_map<std::string, std::vector<const PlanNode*>> dependents;
  for (const auto& n : plan.nodes) {
    std::set<std::string> deps;
    for (const auto& d : n.dependencies()) deps.insert(d);
    pending[n.id] = deps.size();
    for (const auto& d : deps) dependents[d].push_back(&n);
  }

  std::unordered_map<std::string, std::string> names;
  std::vector<const PlanNode*> ready;
  for (const auto& n : plan.nodes) {
    if (pending[n.id] == 0) ready.push_back(&n);
  }

  Plan out;
  out.version = plan.version;
  std::map<std::pair<int, std::string>, std::string> emitted;
  while (!ready.empty()) {
    // Among ready nodes pick the smallest (kind, payload); payload refs are
    // already canonical, so the choice does not depend on the original ids.
    std::size_t best = 0;
    std::pair<int, std::string> best_key;
    for (std::size_t i = 0; i < ready.size(); ++i) {
      std::pair<int, std::string> key{static_cast<int>(ready[i]->kind),
                                      to_json(rename(*ready[i], names), false).dump()};
      if (i == 0 || key < best_key) {
        best = i;
        best_key = std::move(key);
      }
    }
    const PlanNode* node = ready[best];
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(best));

    // Structurally identical nodes collapse into one.
    if (const auto seen = emitted.find(best_key); seen != emitted.end()) {
      names.emplace(node->id, seen->second);
    } else {
      PlanNode renamed = rename(*node, names);
      renamed.id = "n" + std::to_string(out.nodes.size());
      names.emplace(node->id, renamed.id);
      emitted.emplace(best_key, renamed.id);
      out.nodes.push_back(std::move(renamed));
    }
    for (const PlanNode* d : dependents[node->id]) {
      if (--pending[d->id] == 0) ready.push_back(d);
    }
  }
  out.output = names.at(plan.output);
  return out;
}

std::string canonical_bytes(const Plan& plan) { return to_json(canonicalize(plan), false).dump(); }

std::string plan_digest(const Plan& plan) { return sha256_hex(canonical_bytes(plan)); }

Plan make_filter_extract(std::string_view label_instruction, std::string_view span_instruction) {
  if (label_instruction.empty()) throw Error(ErrorCode::EmptyInstruction, "label instruction is empty");
  if (span_instruction.empty()) throw Error(ErrorCode::EmptyInstruction, "span instruction is empty");
  auto node = [](std::string id, NodeKind kind) {
    PlanNode n;
    n.id = std::move(id);
    n.kind = kind;
    return n;
  };
  Plan plan;
  auto source = node("source", NodeKind::Source);
  auto label = node("label", NodeKind::Label);
  label.instruction.text = std::string(label_instruction);
  label.input = "source";
  auto filter = node("filter", NodeKind::Filter);
  filter.predicate = "label";
  filter.input = "source";
  auto span = node("span", NodeKind::Span);
  span.instruction.text = std::string(span_instruction);
  span.input = "filter";
  auto output = node("output", NodeKind::Output);
  output.fields = {{"text", "source"}, {"spans", "span"}};
  plan.nodes = {source, label, filter, span, output};
  plan.output = "output";
  plan.provenance = "filter-extract template";
  return plan;
}

}  // namespace falconer
