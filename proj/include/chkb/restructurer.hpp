#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chkb/knowledge_base.hpp"

namespace chkb {

struct RestructureOptions {
  size_t min_instances = 3;    // cluster size for a new concept
  size_t min_occurrences = 2;  // repetitions for a new function
  size_t max_rounds = 64;      // function extraction rounds
};

// A concept carrying a property value shared by a cluster of instances.
struct ConceptExtraction {
  std::string name;
  std::vector<std::string> parents;
  std::string property;
  Domain domain;                 // declared domain of the property
  Value value;
  bool declares = false;         // the property is declared here because no parent does
  std::vector<std::string> instances;  // gain the concept as a member
  std::vector<std::string> concepts;   // defining concepts that gain it as a parent
  std::vector<std::string> redundant;  // instances whose explicit value repeats the default
};

// A function standing for a repeated composition subtree.
struct FunctionExtraction {
  std::string name;
  std::vector<std::string> parents;
  Signature signature;
  json procedure;
  size_t occurrences = 0;
};

// Replacement of one procedure document stored in a concept's data.
struct ProcedureRewrite {
  std::string concept_name;
  std::string pointer;  // JSON pointer into the concept's data
  json before;
  json after;
};

struct RestructurePlan {
  std::string fingerprint;  // of the graph the plan was computed on
  std::vector<ConceptExtraction> concepts;
  std::vector<FunctionExtraction> functions;
  std::vector<ProcedureRewrite> rewrites;
  std::vector<std::string> notes;

  bool empty() const { return concepts.empty() && functions.empty() && rewrites.empty(); }
};

// FNV-1a of the serialized graph.
std::string graph_fingerprint(const Hierarchy& graph);

RestructurePlan extract_concepts(const KnowledgeBase& kb, const RestructureOptions& options = {});
RestructurePlan extract_functions(const KnowledgeBase& kb, const RestructureOptions& options = {});
// Both extractions against the same graph, in one plan.
RestructurePlan extract_all(const KnowledgeBase& kb, const RestructureOptions& options = {});

// Applies the plan to `kb`, or leaves it untouched and throws: Error("stale-plan")
// when the graph changed since extraction, ValidationError when the result does
// not load, Error("semantics") when a resolved property value would change.
void apply_plan(KnowledgeBase& kb, const RestructurePlan& plan);
// Inverse of apply_plan on the graph it produced.
void revert_plan(KnowledgeBase& kb, const RestructurePlan& plan);

json plan_to_json(const RestructurePlan& plan);
// Throws std::invalid_argument or TypeMismatch on malformed plans.
RestructurePlan plan_from_json(const json& doc, const Hierarchy& graph);

}  // namespace chkb
