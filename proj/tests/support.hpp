#pragma once

#include <string>

#include "chkb/io.hpp"
#include "chkb/knowledge_base.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(CHKB_FIXTURES_DIR) + "/" + name; }

// Loads a fixture hierarchy; throws std::runtime_error listing diagnostics on failure.
inline chkb::KnowledgeBase load_fixture(const std::string& name) {
  chkb::LoadResult r = chkb::load_hierarchy_file(fixture(name));
  if (!r.ok()) {
    std::string msg = name + " failed to load:";
    for (const auto& d : r.diagnostics) msg += "\n  " + d.to_string();
    throw std::runtime_error(msg);
  }
  return std::move(r.kb);
}

inline chkb::KnowledgeBase load_text(const std::string& text) {
  chkb::LoadResult r = chkb::load_hierarchy_text(text);
  if (!r.ok()) {
    std::string msg = "hierarchy failed to load:";
    for (const auto& d : r.diagnostics) msg += "\n  " + d.to_string();
    throw std::runtime_error(msg);
  }
  return std::move(r.kb);
}

inline bool has_code(const std::vector<chkb::Diagnostic>& diags, const std::string& code) {
  for (const auto& d : diags)
    if (d.code == code) return true;
  return false;
}

}  // namespace testing
