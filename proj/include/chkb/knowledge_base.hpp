#pragma once

#include <vector>

#include "chkb/acts.hpp"
#include "chkb/functions.hpp"
#include "chkb/hierarchy.hpp"

namespace chkb {

// A hierarchy together with the function and act libraries derived from it.
// Copies are independent.
struct KnowledgeBase {
  Hierarchy graph;
  FunctionLibrary functions;
  ActsLibrary acts;

  // Rebuilds the index and both libraries from `graph`, then checks defaults,
  // instance values, hooks and ambiguity. Returns errors and warnings.
  std::vector<Diagnostic> finalize();

  EvalContext read_context(const World* world = nullptr) const { return EvalContext{&graph, nullptr, world}; }
};

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace chkb
