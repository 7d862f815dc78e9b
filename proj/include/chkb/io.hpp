#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "chkb/environment.hpp"
#include "chkb/knowledge_base.hpp"

namespace chkb {

struct LoadOptions {
  bool strict = false;  // unknown keys are errors instead of warnings
};

struct LoadResult {
  KnowledgeBase kb;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return !has_errors(diagnostics); }
};

// Parses a hierarchy document {"concepts": {...}, "instances": {...}} and runs
// every load-time validation. Diagnostics carry JSON pointers; parse errors
// carry the line number.
LoadResult load_hierarchy_text(const std::string& text, const LoadOptions& options = {});
// Throws std::runtime_error when the file cannot be read.
LoadResult load_hierarchy_file(const std::string& path, const LoadOptions& options = {});

// Document form of the graph. Raw data keys not modeled by the hierarchy are
// carried through unchanged.
json serialize_hierarchy(const Hierarchy& graph);

// Instances section of a state file, decoded against the concepts of `base`.
// Throws ValidationError.
std::map<std::string, InstanceRecord> load_state_text(const std::string& text, const Hierarchy& base);
std::map<std::string, InstanceRecord> load_state_file(const std::string& path, const Hierarchy& base);

// Newline-delimited trace records:
//   {"timestamp": seconds, "entities": {name: [7 or 8 numbers]},
//    "hands": {gripper: [x,y,z]}, "contacts": [[a, b], ...]}
// Throws std::runtime_error naming the line for malformed records and
// non-increasing timestamps.
std::vector<Frame> load_trace(std::istream& in);
std::vector<Frame> load_trace_file(const std::string& path);

std::string read_file(const std::string& path);

}  // namespace chkb
