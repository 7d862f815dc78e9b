#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chkb/domain.hpp"
#include "chkb/errors.hpp"
#include "chkb/value.hpp"

namespace chkb {

inline constexpr const char* kRootConcept = "Concept";

enum class ConceptKind { EntityConcept, InstanceConcept, ValueDomain, Function, Action, Skill };

const char* concept_kind_name(ConceptKind k);

struct ConceptNode {
  std::string name;
  std::vector<std::string> direct_parents;
  ConceptKind kind = ConceptKind::EntityConcept;
  std::map<std::string, Domain> property_decls;
  std::map<std::string, Value> default_values;
  std::map<std::string, std::string> hooks;  // property -> function name
  json geometry;                             // shared geometry of instance-concepts, or null
  std::vector<std::string> surfaces;
  json raw_data = json::object();            // original "data" block, kept for opaque keys
};

struct InstanceRecord {
  std::string name;
  std::vector<std::string> member_concepts;
  std::map<std::string, Value> property_values;
  json geometry;  // null when absent
  std::vector<std::string> surfaces;
  json raw_data = json::object();

  bool operator==(const InstanceRecord& rhs) const {
    return name == rhs.name && member_concepts == rhs.member_concepts &&
           property_values == rhs.property_values && geometry == rhs.geometry &&
           surfaces == rhs.surfaces;
  }
};

// Where a resolved property value came from.
struct ResolvedProperty {
  Value value;
  std::string source;  // instance name (own value), defining concept, or empty when UNKNOWN
  int distance = -1;   // 0 for an own value, DAG edge count for defaults, -1 when UNKNOWN
};

struct MutationReport {
  std::vector<Diagnostic> warnings;
  std::vector<std::string> dropped_properties;  // "instance.property"
};

// (function, instance, property) triples already fired during one top-level write.
using HookGuard = std::set<std::tuple<std::string, std::string, std::string>>;

// Evaluates hook functions on behalf of Hierarchy::set_property. Implemented by
// the function layer so the hierarchy does not depend on the interpreter.
class HookRunner {
public:
  virtual ~HookRunner() = default;
  virtual void run_hook(const std::string& function, const std::string& instance,
                        const std::string& property, const Value& old_value,
                        const Value& new_value, HookGuard& guard) = 0;
};

// The concept DAG plus the instance store.
//
// Concepts are added in bulk and indexed with rebuild_index(); queries against
// a dirty index throw std::logic_error. Instances may be added and mutated at
// any time. Reads are safe from several threads; writes need exclusive access.
class Hierarchy {
public:
  void add_concept(ConceptNode node);
  void add_instance(InstanceRecord record);
  void remove_concept(const std::string& name);

  // Recomputes concept kinds and the ancestor bitsets. Throws ValidationError
  // (CH001 cycle, CH002 unknown parent, CH003 missing parents).
  void rebuild_index();
  bool index_current() const { return !dirty_; }

  bool has_concept(const std::string& name) const { return concepts_.count(name) > 0; }
  bool has_instance(const std::string& name) const { return instances_.count(name) > 0; }
  bool contains(const std::string& name) const { return has_concept(name) || has_instance(name); }

  const ConceptNode& concept_node(const std::string& name) const;
  ConceptNode& concept_node(const std::string& name);
  const InstanceRecord& instance(const std::string& name) const;
  InstanceRecord& instance(const std::string& name);

  const std::map<std::string, ConceptNode>& concepts() const { return concepts_; }
  const std::map<std::string, InstanceRecord>& instances() const { return instances_; }

  // Reflexive subsumption over concepts and instances. An instance is below
  // each of its member concepts; nothing is below an instance but itself.
  bool is_subconcept(const std::string& child, const std::string& ancestor) const;

  // All concepts above `name` including itself (concepts) or its members (instances).
  std::set<std::string> ancestors(const std::string& name) const;
  std::vector<std::string> instances_of(const std::string& concept_name) const;

  // Breadth-first layers above `name`: layer 0 is the node itself, layer 1 its
  // direct parents (members for an instance), and so on. Each concept appears
  // once, at its minimal edge distance.
  std::vector<std::vector<std::string>> ancestor_layers(const std::string& name) const;

  std::optional<Domain> declared_domain(const std::string& name, const std::string& property) const;
  std::map<std::string, Domain> declared_properties(const std::string& name) const;

  // Own value, else the default of the closest defining concept, else UNKNOWN.
  // Throws LookupError, DeclarationError, AmbiguityError.
  Value resolve_property(const std::string& instance, const std::string& property) const;
  ResolvedProperty resolve_detailed(const std::string& name, const std::string& property,
                                    bool ignore_own_value = false) const;

  // Hooks registered on `property` by any concept above `instance`, deduplicated.
  std::vector<std::string> hooks_for(const std::string& instance, const std::string& property) const;

  // Stores the value and fires each registered hook once per top-level call.
  // Throws TypeMismatch, DeclarationError, LookupError, HookError.
  void set_property(const std::string& instance, const std::string& property, Value value,
                    HookRunner* runner = nullptr, HookGuard* guard = nullptr);

  // Adds then removes member concepts. Stored values whose declaration vanished
  // or no longer typechecks are dropped and reported as warnings.
  MutationReport mutate_instance_concepts(const std::string& instance,
                                          const std::vector<std::string>& add,
                                          const std::vector<std::string>& remove);

  std::set<std::string> most_specialized_common_concepts(const std::vector<std::string>& instances) const;

  // Generic specificity search: concepts at the minimal distance from `name`
  // (itself included) for which `defines` holds.
  std::vector<std::string> nearest_defining(const std::string& name,
                                            const std::function<bool(const ConceptNode&)>& defines) const;

private:
  void require_index() const;
  size_t index_of(const std::string& concept_name) const;
  bool concept_below(size_t child, size_t ancestor) const;
  void recheck_references(const std::string& changed, MutationReport& report);

  std::map<std::string, ConceptNode> concepts_;
  std::map<std::string, InstanceRecord> instances_;

  bool dirty_ = true;
  std::map<std::string, size_t> ids_;
  std::vector<std::vector<uint64_t>> ancestor_bits_;  // row i: bitset of ancestors of concept i (incl. i)
};

// True iff the value's tag matches the domain (recursively for sequences).
// Entity-concept domains accept an EntityRef naming an instance, or a concept
// standing for an unspecified member, that is subsumed by the domain concept.
// UNKNOWN never typechecks. Throws LookupError for an unknown domain concept.
bool typecheck_value(const Value& value, const Domain& domain, const Hierarchy& graph);

// Domain-directed JSON decoding. `graph` may be null; it is consulted to tell
// instance names from plain text when the domain is ValueDomain.
// Throws TypeMismatch.
Value value_from_json(const json& j, const Domain& domain, const Hierarchy* graph);

}  // namespace chkb
