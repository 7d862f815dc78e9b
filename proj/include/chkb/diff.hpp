#pragma once

#include <string>
#include <vector>

#include "chkb/acts.hpp"
#include "chkb/knowledge_base.hpp"

namespace chkb {

struct PropertyChange {
  std::string instance;
  std::string property;
  Value before;
  Value after;
};

struct DiffResult {
  std::vector<ActionInstance> actions;        // canonical order
  std::vector<PropertyChange> unexplained;    // changes no action reproduces
  std::vector<std::string> missing_instances; // present in only one state
};

struct DiffTolerance {
  double translation = 0.01;        // meters
  double angle_deg = 5.0;
};

// A hierarchy whose instance store is replaced by `instances` (concepts shared).
Hierarchy make_state(const Hierarchy& base, const std::map<std::string, InstanceRecord>& instances);

// Properties whose resolved values differ. Locations with the same reference are
// compared as stored, others in the origin frame, both within the tolerance.
// Sequences compare as multisets.
std::vector<PropertyChange> changed_properties(const Hierarchy& a, const Hierarchy& b, const DiffTolerance& tol = {});

// Explains the changes from A to B by a smallest set of actions whose effects,
// simulated on A, reproduce each change exactly once.
DiffResult diff_environments(const KnowledgeBase& kb, const Hierarchy& a, const Hierarchy& b,
                             const DiffTolerance& tol = {});

// Applies the effects of `actions` to a copy of `state`.
Hierarchy apply_actions(const KnowledgeBase& kb, const Hierarchy& state, const std::vector<ActionInstance>& actions);

}  // namespace chkb
