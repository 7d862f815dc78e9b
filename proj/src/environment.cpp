#include "chkb/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chkb {

namespace {

std::pair<std::string, std::string> unordered(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::optional<Eigen::Vector3d> vec3(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3) return std::nullopt;
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j.at(key)[i].is_number()) return std::nullopt;
    v[i] = j.at(key)[i].get<double>();
  }
  return v;
}

json nearest_geometry(const Hierarchy& graph, const std::string& instance) {
  const auto& rec = graph.instance(instance);
  if (!rec.geometry.is_null()) return rec.geometry;
  auto hits = graph.nearest_defining(instance, [](const ConceptNode& n) { return !n.geometry.is_null(); });
  return hits.empty() ? json() : graph.concept_node(hits.front()).geometry;
}

}  // namespace

std::optional<Pose> LocationGraph::global(const std::string& entity) const {
  Pose acc = Pose::identity();
  std::set<std::string> seen;
  std::string cur = entity;
  while (!cur.empty()) {
    if (!seen.insert(cur).second) return std::nullopt;
    auto it = nodes.find(cur);
    if (it == nodes.end()) return std::nullopt;
    acc = it->second.relative * acc;
    cur = it->second.parent;
  }
  return acc;
}

std::vector<std::string> LocationGraph::topological_order() const {
  std::map<std::string, std::vector<std::string>> children;
  std::vector<std::string> order;
  for (const auto& [name, node] : nodes)
    if (node.parent.empty() || !nodes.count(node.parent))
      order.push_back(name);
    else
      children[node.parent].push_back(name);
  for (size_t i = 0; i < order.size(); ++i)
    for (const auto& c : children[order[i]]) order.push_back(c);
  return order;
}

bool LocationGraph::is_forest() const { return topological_order().size() == nodes.size(); }

std::vector<SurfacePatch> surfaces_of(const Hierarchy& graph, const std::string& owner) {
  std::vector<SurfacePatch> out;
  if (!graph.has_instance(owner)) return out;
  for (const auto& s : graph.instance(owner).surfaces) {
    SurfacePatch p{s, owner};
    if (graph.has_instance(s)) {
      const json geo = nearest_geometry(graph, s);
      if (auto c = vec3(geo, "center")) p.center = *c;
      if (auto n = vec3(geo, "normal"); n && n->norm() > 0) p.normal = n->normalized();
    }
    out.push_back(std::move(p));
  }
  return out;
}

Environment::Environment(KnowledgeBase kb, size_t history, ContactRules rules)
    : kb_(std::move(kb)), capacity_(history), rules_(rules) {
  if (capacity_ == 0) throw std::invalid_argument("history capacity must be positive");
  build_initial_graph();
  update_interaction_volumes();
}

bool Environment::is_a(const std::string& instance, const std::string& concept_name) const {
  const auto& g = kb_.graph;
  return g.has_concept(concept_name) && g.contains(instance) && g.is_subconcept(instance, concept_name);
}

void Environment::warn(const std::string& node, const std::string& message) {
  if (!warned_.insert(node + "\n" + message).second) return;
  warnings_.push_back({"environment", node, message, "", true});
}

std::vector<Diagnostic> Environment::take_warnings() {
  std::vector<Diagnostic> out;
  out.swap(warnings_);
  return out;
}

void Environment::build_initial_graph() {
  const auto& g = kb_.graph;
  for (const auto& [name, rec] : g.instances()) {
    const bool surface = is_a(name, "Surface") || is_a(name, "SurfaceInstance");
    if (surface) continue;
    const bool agent = is_a(name, "Agent");
    const bool gripper = !agent && is_a(name, "Gripper");
    std::optional<Location> loc;
    if (g.declared_domain(name, "location")) {
      try {
        Value v = g.resolve_property(name, "location");
        if (v.is(Value::Kind::Location)) loc = v.as_location();
      } catch (const Error&) {
      }
    }
    if (agent)
      agents_.push_back(name);
    else if (gripper)
      grippers_.push_back(name);
    else if (loc)
      objects_.push_back(name);
    else
      continue;
    LocationGraph::Node node;
    if (loc) {
      node.parent = anchor_of(g, loc->reference);
      node.relative = loc->pose;
      if (!node.parent.empty() && !g.has_instance(node.parent)) {
        warn(name, "location reference '" + node.parent + "' is not an instance; using the origin");
        node.parent.clear();
      }
    }
    graph_.nodes[name] = node;
  }
  for (auto& [name, node] : graph_.nodes)
    if (!node.parent.empty() && !graph_.nodes.count(node.parent)) {
      warn(name, "location reference '" + node.parent + "' has no location; using the origin");
      node.parent.clear();
    }
  if (!graph_.is_forest()) {
    for (auto& [name, node] : graph_.nodes)
      if (!graph_.global(name)) {
        warn(name, "cyclic location references; re-rooted at the origin");
        node.parent.clear();
      }
  }
  for (const auto& n : graph_.topological_order()) globals_[n] = *graph_.global(n);
}

std::optional<double> Environment::time() const {
  if (history_.empty()) return std::nullopt;
  return history_.back().timestamp;
}

std::string Environment::owner_or_self(const std::string& name) const {
  if (graph_.nodes.count(name)) return name;
  const std::string owner = surface_owner(kb_.graph, name);
  return owner.empty() ? name : owner;
}

void Environment::compute_contacts(const Frame& frame, const std::map<std::string, Pose>& provisional) {
  contacts_.clear();
  supports_.clear();
  const auto& g = kb_.graph;
  auto add_support = [&](const std::string& object, const std::string& supporter) {
    auto& s = supports_[object];
    if (std::find(s.begin(), s.end(), supporter) == s.end()) s.push_back(supporter);
  };
  auto typed = [&](const std::string& a, const std::string& b, const std::string& ea, const std::string& eb) {
    if (is_a(a, "ObjectStableSupportSurface") && is_a(b, "SurfaceToSupport")) add_support(ea, eb);
    if (is_a(b, "ObjectStableSupportSurface") && is_a(a, "SurfaceToSupport")) add_support(eb, ea);
  };

  if (frame.contacts) {
    for (const auto& [a, b] : *frame.contacts) {
      const std::string ea = owner_or_self(a), eb = owner_or_self(b);
      if (!graph_.nodes.count(ea) || !graph_.nodes.count(eb)) {
        warn(graph_.nodes.count(ea) ? b : a, "contact names an entity without a pose; ignored");
        continue;
      }
      if (ea == eb) continue;
      contacts_.insert(unordered(ea, eb));
      typed(a, b, ea, eb);
    }
    return;
  }

  // Geometric rule over surface patches.
  const double cos_tol = std::cos(rules_.normal_tolerance_deg * M_PI / 180.0);
  std::vector<std::pair<SurfacePatch, Pose>> patches;
  for (const auto& n : objects_) {
    auto pose = provisional.find(n);
    if (pose == provisional.end()) continue;
    for (auto& p : surfaces_of(g, n)) patches.emplace_back(std::move(p), pose->second);
  }
  for (size_t i = 0; i < patches.size(); ++i)
    for (size_t j = i + 1; j < patches.size(); ++j) {
      const auto& [pa, posea] = patches[i];
      const auto& [pb, poseb] = patches[j];
      if (pa.owner == pb.owner) continue;
      const Eigen::Vector3d ca = posea.apply(pa.center), cb = poseb.apply(pb.center);
      const Eigen::Vector3d na = posea.rotation * pa.normal, nb = poseb.rotation * pb.normal;
      if ((ca - cb).norm() > rules_.surface_distance || na.dot(nb) > -cos_tol) continue;
      contacts_.insert(unordered(pa.owner, pb.owner));
      typed(pa.name, pb.name, pa.owner, pb.owner);
    }
  for (const auto& gr : grippers_) {
    auto gp = provisional.find(gr);
    if (gp == provisional.end()) continue;
    for (const auto& o : objects_) {
      auto op = provisional.find(o);
      if (op != provisional.end() && (gp->second.translation - op->second.translation).norm() <= rules_.gripper_distance)
        contacts_.insert(unordered(gr, o));
    }
  }
  for (const auto& [object, grippers] : grasped_by)
    for (const auto& gr : grippers)
      if (graph_.nodes.count(object) && graph_.nodes.count(gr)) contacts_.insert(unordered(gr, object));
}

std::vector<std::string> Environment::gripper_contacts(const std::string& object) const {
  std::vector<std::string> out;
  for (const auto& gr : grippers_)
    if (contacts_.count(unordered(gr, object))) out.push_back(gr);
  return out;  // grippers_ is name-ordered
}

void Environment::push_frame(const Frame& frame) {
  if (auto t = time(); t && frame.timestamp <= *t)
    throw std::invalid_argument("frame timestamp " + std::to_string(frame.timestamp) + " does not follow " +
                                std::to_string(*t));
  const auto& g = kb_.graph;
  std::map<std::string, Pose> observed;
  auto observe = [&](const std::string& name, const Pose& pose) {
    if (!g.has_instance(name)) {
      warn(name, "pose for an unknown instance ignored");
      return;
    }
    if (!graph_.nodes.count(name)) {
      if (is_a(name, "Surface") || is_a(name, "SurfaceInstance")) {
        warn(name, "surface poses are derived from their owner; ignored");
        return;
      }
      graph_.nodes[name] = LocationGraph::Node{};
      if (is_a(name, "Agent"))
        agents_.push_back(name);
      else if (is_a(name, "Gripper"))
        grippers_.push_back(name);
      else
        objects_.push_back(name);
      for (auto* v : {&agents_, &grippers_, &objects_}) std::sort(v->begin(), v->end());
    }
    observed[name] = pose;
  };
  for (const auto& [name, pose] : frame.entity_poses) observe(name, pose);
  for (const auto& [name, pos] : frame.hand_positions) observe(name, Pose::from_translation(pos));

  // Provisional origin-frame poses: observations, everything else rides along with its old parent.
  const auto old_nodes = graph_.nodes;
  std::map<std::string, Pose> prov;
  for (const auto& n : graph_.topological_order()) {
    const auto& node = graph_.nodes.at(n);
    if (auto o = observed.find(n); o != observed.end())
      prov[n] = o->second;
    else if (node.parent.empty())
      prov[n] = node.relative;
    else
      prov[n] = prov.at(node.parent) * node.relative;
  }
  compute_contacts(frame, prov);

  std::set<std::string> fixed(agents_.begin(), agents_.end());
  fixed.insert(grippers_.begin(), grippers_.end());
  for (auto& [name, node] : graph_.nodes) {
    if (fixed.count(name)) {
      if (observed.count(name)) node.parent.clear();
      continue;
    }
    const auto holders = gripper_contacts(name);
    if (!holders.empty()) {
      const std::string agent = agent_of(holders.front());
      node.parent = agent.empty() || !graph_.nodes.count(agent) ? holders.front() : agent;
      continue;
    }
    auto sup = supports_.find(name);
    if (sup != supports_.end() && !sup->second.empty()) {
      std::string best = sup->second.front();
      if (sup->second.size() > 1) {
        double best_d = INFINITY;
        for (const auto& s : sup->second) {
          const double d = (prov.at(s).translation - prov.at(name).translation).norm();
          if (d < best_d) best_d = d, best = s;
        }
        warn(name, "several supporting objects; using the nearest, '" + best + "'");
      }
      node.parent = best;
      continue;
    }
    if (observed.count(name)) node.parent.clear();
  }
  for (auto& [name, node] : graph_.nodes)
    if (!graph_.global(name)) {
      warn(name, "reference would close a cycle; re-rooted at the origin");
      node.parent.clear();
    }

  std::map<std::string, Pose> globals;
  for (const auto& n : graph_.topological_order()) {
    auto& node = graph_.nodes.at(n);
    const Pose parent = node.parent.empty() ? Pose::identity() : globals.at(node.parent);
    if (auto o = observed.find(n); o != observed.end()) {
      node.relative = parent.inverse() * o->second;
    } else {
      auto old = old_nodes.find(n);
      if (old == old_nodes.end() || old->second.parent != node.parent) node.relative = parent.inverse() * prov.at(n);
    }
    globals[n] = node.parent.empty() ? node.relative : parent * node.relative;
  }
  globals_ = std::move(globals);

  history_.push_back(frame);
  while (history_.size() > capacity_) history_.pop_front();
  update_interaction_volumes();
}

std::optional<double> Environment::interaction_radius(const std::string& instance) const {
  try {
    Value v = kb_.graph.resolve_property(instance, "interactionVolume");
    if (v.is(Value::Kind::Number)) return v.as_number();
  } catch (const Error&) {
  }
  return std::nullopt;
}

bool Environment::in_interaction_volume(const std::string& gripper, const std::string& object) const {
  auto rg = interaction_radius(gripper);
  auto ro = interaction_radius(object);
  if (!rg || !ro)
    throw EvalError("unknown-input", "interactionVolume of '" + (rg ? object : gripper) + "' is unknown");
  auto pg = global_pose(gripper);
  auto po = global_pose(object);
  if (!pg || !po) throw EvalError("unknown-input", "no position for '" + (pg ? object : gripper) + "'");
  return (pg->translation - po->translation).norm() <= *rg + *ro;
}

void Environment::update_interaction_volumes() {
  for (const auto& gr : grippers_) {
    std::set<std::string> now;
    for (const auto& o : objects_) {
      try {
        if (in_interaction_volume(gr, o)) now.insert(o);
      } catch (const EvalError& e) {
        warn(o, std::string(e.what()) + "; skipped for interaction volumes");
      }
    }
    auto& before = iv_[gr];
    auto& in = entered_[gr];
    auto& out = departed_[gr];
    in.clear();
    out.clear();
    std::set_difference(now.begin(), now.end(), before.begin(), before.end(), std::inserter(in, in.end()));
    std::set_difference(before.begin(), before.end(), now.begin(), now.end(), std::inserter(out, out.end()));
    before = std::move(now);
  }
}

const std::set<std::string>& Environment::iv_objects(const std::string& gripper) const {
  static const std::set<std::string> empty;
  auto it = iv_.find(gripper);
  return it == iv_.end() ? empty : it->second;
}

const std::set<std::string>& Environment::entered_iv(const std::string& gripper) const {
  static const std::set<std::string> empty;
  auto it = entered_.find(gripper);
  return it == entered_.end() ? empty : it->second;
}

const std::set<std::string>& Environment::departed_iv(const std::string& gripper) const {
  static const std::set<std::string> empty;
  auto it = departed_.find(gripper);
  return it == departed_.end() ? empty : it->second;
}

std::optional<Pose> Environment::global_pose(const std::string& entity) const {
  auto it = globals_.find(owner_or_self(entity));
  if (it == globals_.end()) return std::nullopt;
  return it->second;
}

std::optional<Location> Environment::current_location(const std::string& entity) const {
  auto it = graph_.nodes.find(entity);
  if (it == graph_.nodes.end()) return std::nullopt;
  return Location{it->second.parent, it->second.relative};
}

bool Environment::in_contact(const std::string& a, const std::string& b) const {
  return contacts_.count(unordered(owner_or_self(a), owner_or_self(b))) > 0;
}

bool Environment::is_supported(const std::string& entity) const {
  auto it = supports_.find(owner_or_self(entity));
  return it != supports_.end() && !it->second.empty();
}

std::vector<std::string> Environment::agents() const { return agents_; }

std::vector<std::string> Environment::grippers_of(const std::string& agent) const {
  std::vector<std::string> out;
  try {
    Value v = kb_.graph.resolve_property(agent, "grippers");
    if (v.is(Value::Kind::Sequence))
      for (const auto& item : v.as_sequence().items)
        if (item.is(Value::Kind::EntityRef) && kb_.graph.has_instance(item.as_entity())) out.push_back(item.as_entity());
  } catch (const Error&) {
  }
  if (out.empty())
    for (const auto& gr : grippers_)
      if (agent_of(gr) == agent) out.push_back(gr);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string Environment::agent_of(const std::string& gripper) const {
  try {
    Value v = kb_.graph.resolve_property(gripper, "belongingAgent");
    if (v.is(Value::Kind::EntityRef)) return v.as_entity();
  } catch (const Error&) {
  }
  return "";
}

}  // namespace chkb
