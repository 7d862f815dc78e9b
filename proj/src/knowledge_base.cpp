#include "chkb/knowledge_base.hpp"

#include <algorithm>
#include <set>

namespace chkb {

namespace {

bool domain_known(const Domain& d, const Hierarchy& graph) {
  if (d.kind() == Domain::Kind::Sequence) return domain_known(d.element(), graph);
  return !d.is_entity() || graph.has_concept(d.concept_name());
}

}  // namespace

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return !d.warning; });
}

std::vector<Diagnostic> KnowledgeBase::finalize() {
  try {
    graph.rebuild_index();
  } catch (const ValidationError& e) {
    return e.diagnostics();
  }
  std::vector<Diagnostic> diags;

  for (const auto& [name, node] : graph.concepts()) {
    const std::string ptr = "/concepts/" + name + "/data";
    for (const auto& [prop, dom] : node.property_decls)
      if (!domain_known(dom, graph))
        diags.push_back({"CH006", name, "property '" + prop + "' has unknown domain '" + dom.to_string() + "'",
                         ptr + "/properties/" + prop});
    for (const auto& [prop, value] : node.default_values) {
      auto dom = graph.declared_domain(name, prop);
      if (!dom) {
        diags.push_back({"CH007", name, "default for undeclared property '" + prop + "'", ptr + "/properties/default/" + prop});
        continue;
      }
      if (!domain_known(*dom, graph) || value.is_unknown()) continue;
      if (!typecheck_value(value, *dom, graph))
        diags.push_back({"CH014", name, "default " + value.to_string() + " for '" + prop + "' is not a " + dom->to_string(),
                         ptr + "/properties/default/" + prop});
    }
    for (const auto& [prop, fn] : node.hooks)
      if (!graph.declared_domain(name, prop))
        diags.push_back({"CH007", name, "hook on undeclared property '" + prop + "'", ptr + "/hooks/" + prop});
  }

  // Declarations reached at the same distance must agree on the domain.
  for (const auto& [name, node] : graph.concepts()) {
    std::set<std::string> visible;
    for (const auto& layer : graph.ancestor_layers(name))
      for (const auto& c : layer)
        for (const auto& [prop, dom] : graph.concept_node(c).property_decls) visible.insert(prop);
    for (const auto& prop : visible) {
      const auto hits = graph.nearest_defining(name, [&](const ConceptNode& n) { return n.property_decls.count(prop) > 0; });
      for (const auto& h : hits)
        if (!(graph.concept_node(h).property_decls.at(prop) == graph.concept_node(hits.front()).property_decls.at(prop))) {
          diags.push_back({"CH023", name,
                           "'" + prop + "' is declared with different domains by " + hits.front() + " and " + h,
                           "/concepts/" + name});
          break;
        }
    }
  }

  for (const auto& [name, rec] : graph.instances()) {
    const std::string ptr = "/instances/" + name;
    if (graph.has_concept(name))
      diags.push_back({"CH005", name, "instance name collides with a concept", ptr});
    bool members_ok = !rec.member_concepts.empty();
    if (!members_ok) diags.push_back({"CH003", name, "instance has no direct_parents", ptr});
    for (const auto& m : rec.member_concepts)
      if (!graph.has_concept(m)) {
        diags.push_back({"CH009", name, "unknown member concept '" + m + "'", ptr + "/direct_parents"});
        members_ok = false;
      }
    if (!members_ok) continue;
    for (const auto& [prop, value] : rec.property_values) {
      auto dom = graph.declared_domain(name, prop);
      if (!dom) {
        diags.push_back({"CH010", name, "value for undeclared property '" + prop + "'", ptr + "/data/propertyValues/" + prop});
        continue;
      }
      if (!domain_known(*dom, graph) || value.is_unknown()) continue;
      if (!typecheck_value(value, *dom, graph))
        diags.push_back({"CH011", name, "value " + value.to_string() + " for '" + prop + "' is not a " + dom->to_string(),
                         ptr + "/data/propertyValues/" + prop});
    }
    for (const auto& [prop, dom] : graph.declared_properties(name)) {
      try {
        graph.resolve_detailed(name, prop);
      } catch (const AmbiguityError& e) {
        diags.push_back({"CH020", name, e.what(), ptr});
      }
    }
  }
  if (has_errors(diags)) return diags;

  auto fn_diags = functions.load(graph);
  diags.insert(diags.end(), fn_diags.begin(), fn_diags.end());
  if (has_errors(fn_diags)) return diags;

  for (const auto& [name, node] : graph.concepts())
    for (const auto& [prop, fn] : node.hooks) {
      if (!functions.has(fn))
        diags.push_back({"CH021", name, "hook function '" + fn + "' is not defined", "/concepts/" + name + "/data/hooks/" + prop});
      else if (functions.def(fn).signature.arguments.size() != 3)
        diags.push_back({"CH021", name, "hook function '" + fn + "' must take (instance, old, new)",
                         "/concepts/" + name + "/data/hooks/" + prop});
    }

  auto act_diags = acts.load(graph, functions);
  diags.insert(diags.end(), act_diags.begin(), act_diags.end());
  return diags;
}

}  // namespace chkb
