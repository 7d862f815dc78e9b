#include "chkb/world.hpp"

#include <set>

namespace chkb {

namespace {

std::optional<Location> stored_location(const Hierarchy& graph, const std::string& entity) {
  if (!graph.has_instance(entity)) return std::nullopt;
  try {
    const Value v = graph.resolve_property(entity, "location");
    if (!v.is(Value::Kind::Location)) return std::nullopt;
    return v.as_location();
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool is_agent(const Hierarchy& graph, const std::string& name) {
  for (const char* c : {"Agent", "AgentInstance"})
    if (graph.has_concept(c) && graph.is_subconcept(name, c)) return true;
  return false;
}

}  // namespace

std::string surface_owner(const Hierarchy& graph, const std::string& surface) {
  for (const auto& [name, rec] : graph.instances())
    for (const auto& s : rec.surfaces)
      if (s == surface) return name;
  return "";
}

std::string anchor_of(const Hierarchy& graph, const std::string& reference) {
  if (reference.empty()) return reference;
  const std::string owner = surface_owner(graph, reference);
  return owner.empty() ? reference : owner;
}

std::optional<Pose> globalize(const World& world, const Location& loc) {
  if (loc.reference.empty()) return loc.pose;
  auto base = world.global_pose(loc.reference);
  if (!base) return std::nullopt;
  return *base * loc.pose;
}

std::optional<Pose> StaticWorld::global_pose(const std::string& entity) const {
  Pose acc = Pose::identity();
  std::set<std::string> visited;
  std::string cur = anchor_of(graph_, entity);
  while (true) {
    if (!visited.insert(cur).second) return std::nullopt;
    auto loc = stored_location(graph_, cur);
    if (!loc) return std::nullopt;
    acc = loc->pose * acc;
    cur = anchor_of(graph_, loc->reference);
    if (cur.empty()) return acc;
  }
}

std::optional<Location> StaticWorld::current_location(const std::string& entity) const {
  auto loc = stored_location(graph_, entity);
  if (loc) loc->reference = anchor_of(graph_, loc->reference);
  return loc;
}

bool StaticWorld::in_contact(const std::string& a, const std::string& b) const {
  auto la = current_location(a);
  auto lb = current_location(b);
  return (la && la->reference == b) || (lb && lb->reference == a);
}

bool StaticWorld::is_supported(const std::string& entity) const {
  auto loc = current_location(entity);
  return loc && !loc->reference.empty() && graph_.has_instance(loc->reference) &&
         !is_agent(graph_, loc->reference);
}

}  // namespace chkb
