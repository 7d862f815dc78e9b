#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chkb/functions.hpp"
#include "chkb/hierarchy.hpp"

namespace chkb {

using Bindings = std::map<std::string, Value>;

struct ParamSpec {
  std::vector<std::string> required;    // conjunction, nonempty
  std::vector<std::string> restricted;  // the entity must belong to none of these
};

enum class ParamRole { Agent, Entity, Value };

struct ParamDef {
  std::string name;
  ParamRole role = ParamRole::Entity;
  ParamSpec spec;        // agents and entities
  Domain domain;         // value parameters; entity domain is spec.required.front()
  std::string extract;   // value parameters: function filling it from the entity bindings
  bool optional = false;
};

enum class Stage { Pre, Check, Succ, Eff };
const char* stage_name(Stage s);

struct ActionAssociation {
  std::string action;
  std::map<std::string, std::string> mapping;  // action param -> skill param or "param.property"
};

struct ManipulationTemplate {
  std::string agent, gripper, object;  // parameter names
};

// Shared shape of skills and actions. Actions have no agents, check, success,
// associations or manipulations.
struct ActDef {
  std::string name;
  bool is_skill = false;
  std::vector<ParamDef> params;               // agents, then entities, then values
  std::map<Stage, std::string> stages;        // stage -> function name
  std::vector<ActionAssociation> associations;
  std::vector<ManipulationTemplate> manipulations;
  json bt;                                    // opaque behavior tree, null when absent

  const ParamDef* param(const std::string& name) const;
  std::vector<const ParamDef*> entity_params() const;  // agents and entities
};

using Manipulation = std::tuple<std::string, std::string, std::string>;  // agent, gripper, object

struct ActionInstance {
  std::string action;
  Bindings params;
  bool operator==(const ActionInstance&) const = default;
};

// Skill and action definitions read from the hierarchy. Inline stage procedures
// are synthesized into the function library as "<Def>.<stage>".
class ActsLibrary {
public:
  std::vector<Diagnostic> load(const Hierarchy& graph, FunctionLibrary& functions);

  const std::map<std::string, ActDef>& defs() const { return defs_; }
  const ActDef& def(const std::string& name) const;
  bool has(const std::string& name) const { return defs_.count(name) > 0; }
  std::vector<const ActDef*> skills() const;
  std::vector<const ActDef*> actions() const;

private:
  std::map<std::string, ActDef> defs_;
};

// Every required concept and no restricted concept. Throws LookupError for an
// unknown concept in the spec.
bool entity_matches_parameter(const Hierarchy& graph, const std::string& entity, const ParamSpec& spec);

using Affordance = std::set<std::pair<std::string, std::string>>;  // (definition, parameter)
Affordance affordances(const Hierarchy& graph, const std::string& entity, const ActsLibrary& acts);

// All (definition, p1..pn) where entity i affords (definition, pi) and the pi
// are pairwise distinct.
std::set<std::pair<std::string, std::vector<std::string>>> merge_affordances(
    const Hierarchy& graph, const std::vector<std::string>& entities, const ActsLibrary& acts);

// Agent and entity bindings satisfy their parameter specs.
bool bindings_match(const Hierarchy& graph, const ActDef& def, const Bindings& bindings);

// Evaluates one stage. Returns the Boolean for pre/check/succ, nullopt for eff.
// An absent succ stage counts as true; an absent pre or check as true; an
// absent eff does nothing. Errors are rethrown as EvalError with the stage named.
std::optional<bool> run_stage(const FunctionLibrary& functions, const ActDef& def, Stage stage,
                              const Bindings& bindings, EvalContext& ctx);

std::vector<Manipulation> manipulations_of(const ActDef& skill, const Bindings& bindings);

// One action instance per association; call after the skill's effects.
std::vector<ActionInstance> derive_actions(const Hierarchy& graph, const ActDef& skill, const Bindings& bindings);

}  // namespace chkb
