#include "chkb/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <iterator>
#include <stdexcept>

namespace chkb {

namespace {

bool references(const Value& v, const std::string& name) {
  if (v.is(Value::Kind::EntityRef)) return v.as_entity() == name;
  if (v.is(Value::Kind::Location)) return v.as_location().reference == name;
  if (v.is(Value::Kind::Sequence))
    return std::any_of(v.as_sequence().items.begin(), v.as_sequence().items.end(),
                       [&](const Value& item) { return references(item, name); });
  return false;
}

const std::set<std::string>& instance_markers() {
  static const std::set<std::string> markers = {"ObjectInstance", "AgentInstance", "GripperInstance",
                                                "SurfaceInstance"};
  return markers;
}

}  // namespace

const char* concept_kind_name(ConceptKind k) {
  switch (k) {
    case ConceptKind::EntityConcept: return "entity-concept";
    case ConceptKind::InstanceConcept: return "instance-concept";
    case ConceptKind::ValueDomain: return "value-domain";
    case ConceptKind::Function: return "function";
    case ConceptKind::Action: return "action";
    case ConceptKind::Skill: return "skill";
  }
  return "?";
}

void Hierarchy::add_concept(ConceptNode node) {
  std::string name = node.name;
  concepts_[name] = std::move(node);
  dirty_ = true;
}

void Hierarchy::add_instance(InstanceRecord record) {
  std::string name = record.name;
  instances_[name] = std::move(record);
}

void Hierarchy::remove_concept(const std::string& name) {
  if (concepts_.erase(name) == 0) throw LookupError(name);
  dirty_ = true;
}

void Hierarchy::rebuild_index() {
  std::vector<Diagnostic> diags;
  for (const auto& [name, node] : concepts_) {
    if (name == kRootConcept) {
      if (!node.direct_parents.empty())
        diags.push_back({"CH003", name, "the root concept must not have parents", ""});
      continue;
    }
    if (node.direct_parents.empty())
      diags.push_back({"CH003", name, "concept has no direct_parents", ""});
    for (const auto& p : node.direct_parents)
      if (!concepts_.count(p))
        diags.push_back({"CH002", name, "unknown parent concept '" + p + "'", ""});
  }
  if (!diags.empty()) throw ValidationError(diags);

  // Kahn's algorithm over child -> parent edges, parents first.
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& [name, node] : concepts_) {
    pending[name] = static_cast<int>(node.direct_parents.size());
    for (const auto& p : node.direct_parents) children[p].push_back(name);
  }
  std::deque<std::string> ready;
  for (const auto& [name, count] : pending)
    if (count == 0) ready.push_back(name);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string n = ready.front();
    ready.pop_front();
    order.push_back(n);
    for (const auto& c : children[n])
      if (--pending[c] == 0) ready.push_back(c);
  }
  if (order.size() != concepts_.size()) {
    std::string members;
    for (const auto& [name, count] : pending)
      if (count > 0) members += (members.empty() ? "" : ", ") + name;
    throw ValidationError({{"CH001", members, "cycle in direct_parents involving: " + members, ""}});
  }

  ids_.clear();
  for (size_t i = 0; i < order.size(); ++i) ids_[order[i]] = i;
  const size_t words = (order.size() + 63) / 64;
  ancestor_bits_.assign(order.size(), std::vector<uint64_t>(words, 0));
  for (size_t i = 0; i < order.size(); ++i) {
    auto& row = ancestor_bits_[i];
    row[i / 64] |= uint64_t{1} << (i % 64);
    for (const auto& p : concepts_[order[i]].direct_parents) {
      const auto& prow = ancestor_bits_[ids_[p]];
      for (size_t w = 0; w < words; ++w) row[w] |= prow[w];
    }
  }
  dirty_ = false;

  auto below = [&](const std::string& n, const char* a) {
    auto it = ids_.find(a);
    return it != ids_.end() && concept_below(ids_[n], it->second);
  };
  for (auto& [name, node] : concepts_) {
    if (below(name, "ValueDomain"))
      node.kind = ConceptKind::ValueDomain;
    else if (below(name, "Function"))
      node.kind = ConceptKind::Function;
    else if (below(name, "Action"))
      node.kind = ConceptKind::Action;
    else if (below(name, "Skill"))
      node.kind = ConceptKind::Skill;
    else {
      node.kind = ConceptKind::EntityConcept;
      for (const auto& m : instance_markers())
        if (name != m && below(name, m.c_str())) node.kind = ConceptKind::InstanceConcept;
    }
  }
}

void Hierarchy::require_index() const {
  if (dirty_) throw std::logic_error("hierarchy index is stale; call rebuild_index()");
}

size_t Hierarchy::index_of(const std::string& concept_name) const {
  auto it = ids_.find(concept_name);
  if (it == ids_.end()) throw LookupError(concept_name);
  return it->second;
}

bool Hierarchy::concept_below(size_t child, size_t ancestor) const {
  return (ancestor_bits_[child][ancestor / 64] >> (ancestor % 64)) & 1u;
}

const ConceptNode& Hierarchy::concept_node(const std::string& name) const {
  auto it = concepts_.find(name);
  if (it == concepts_.end()) throw LookupError(name);
  return it->second;
}

ConceptNode& Hierarchy::concept_node(const std::string& name) {
  auto it = concepts_.find(name);
  if (it == concepts_.end()) throw LookupError(name);
  return it->second;
}

const InstanceRecord& Hierarchy::instance(const std::string& name) const {
  auto it = instances_.find(name);
  if (it == instances_.end()) throw LookupError(name);
  return it->second;
}

InstanceRecord& Hierarchy::instance(const std::string& name) {
  auto it = instances_.find(name);
  if (it == instances_.end()) throw LookupError(name);
  return it->second;
}

bool Hierarchy::is_subconcept(const std::string& child, const std::string& ancestor) const {
  require_index();
  if (auto inst = instances_.find(child); inst != instances_.end()) {
    if (child == ancestor) return true;
    if (instances_.count(ancestor)) return false;
    const size_t a = index_of(ancestor);
    for (const auto& m : inst->second.member_concepts)
      if (concept_below(index_of(m), a)) return true;
    return false;
  }
  const size_t c = index_of(child);
  if (instances_.count(ancestor)) return false;
  return concept_below(c, index_of(ancestor));
}

std::set<std::string> Hierarchy::ancestors(const std::string& name) const {
  require_index();
  std::vector<size_t> roots;
  if (auto inst = instances_.find(name); inst != instances_.end()) {
    for (const auto& m : inst->second.member_concepts) roots.push_back(index_of(m));
  } else {
    roots.push_back(index_of(name));
  }
  std::set<std::string> out;
  for (const auto& [cname, id] : ids_)
    for (size_t r : roots)
      if (concept_below(r, id)) {
        out.insert(cname);
        break;
      }
  return out;
}

std::vector<std::string> Hierarchy::instances_of(const std::string& concept_name) const {
  std::vector<std::string> out;
  for (const auto& [name, rec] : instances_)
    if (is_subconcept(name, concept_name)) out.push_back(name);
  return out;
}

std::vector<std::vector<std::string>> Hierarchy::ancestor_layers(const std::string& name) const {
  std::vector<std::vector<std::string>> layers;
  std::set<std::string> seen;
  std::vector<std::string> frontier;
  if (auto inst = instances_.find(name); inst != instances_.end()) {
    layers.push_back({name});
    for (const auto& m : inst->second.member_concepts) {
      if (!concepts_.count(m)) throw LookupError(m);
      if (seen.insert(m).second) frontier.push_back(m);
    }
  } else {
    if (!concepts_.count(name)) throw LookupError(name);
    seen.insert(name);
    frontier.push_back(name);
  }
  while (!frontier.empty()) {
    std::sort(frontier.begin(), frontier.end());
    layers.push_back(frontier);
    std::vector<std::string> next;
    for (const auto& c : frontier)
      for (const auto& p : concept_node(c).direct_parents)
        if (seen.insert(p).second) next.push_back(p);
    frontier = std::move(next);
  }
  return layers;
}

std::optional<Domain> Hierarchy::declared_domain(const std::string& name,
                                                 const std::string& property) const {
  for (const auto& layer : ancestor_layers(name))
    for (const auto& c : layer) {
      auto cit = concepts_.find(c);
      if (cit == concepts_.end()) continue;
      auto d = cit->second.property_decls.find(property);
      if (d != cit->second.property_decls.end()) return d->second;
    }
  return std::nullopt;
}

std::map<std::string, Domain> Hierarchy::declared_properties(const std::string& name) const {
  std::map<std::string, Domain> out;
  for (const auto& layer : ancestor_layers(name))
    for (const auto& c : layer) {
      auto cit = concepts_.find(c);
      if (cit == concepts_.end()) continue;
      for (const auto& [prop, dom] : cit->second.property_decls) out.emplace(prop, dom);
    }
  return out;
}

ResolvedProperty Hierarchy::resolve_detailed(const std::string& name, const std::string& property,
                                             bool ignore_own_value) const {
  if (!contains(name)) throw LookupError(name);
  if (!declared_domain(name, property)) throw DeclarationError(name, property);
  const auto layers = ancestor_layers(name);
  if (auto inst = instances_.find(name); inst != instances_.end() && !ignore_own_value) {
    auto v = inst->second.property_values.find(property);
    if (v != inst->second.property_values.end()) return {v->second, name, 0};
  }
  for (size_t d = 0; d < layers.size(); ++d) {
    std::vector<std::string> definers;
    const Value* first = nullptr;
    bool conflict = false;
    for (const auto& c : layers[d]) {
      auto cit = concepts_.find(c);
      if (cit == concepts_.end()) continue;
      auto def = cit->second.default_values.find(property);
      if (def == cit->second.default_values.end()) continue;
      definers.push_back(c);
      if (!first)
        first = &def->second;
      else if (!(def->second == *first))
        conflict = true;
    }
    if (conflict) throw AmbiguityError(name, property, definers);
    if (first) return {*first, definers.front(), static_cast<int>(d)};
  }
  return {Value::unknown(), "", -1};
}

Value Hierarchy::resolve_property(const std::string& instance, const std::string& property) const {
  if (!has_instance(instance)) throw LookupError(instance);
  return resolve_detailed(instance, property).value;
}

std::vector<std::string> Hierarchy::hooks_for(const std::string& instance,
                                              const std::string& property) const {
  std::vector<std::string> out;
  for (const auto& layer : ancestor_layers(instance))
    for (const auto& c : layer) {
      auto cit = concepts_.find(c);
      if (cit == concepts_.end()) continue;
      auto h = cit->second.hooks.find(property);
      if (h != cit->second.hooks.end() &&
          std::find(out.begin(), out.end(), h->second) == out.end())
        out.push_back(h->second);
    }
  return out;
}

void Hierarchy::set_property(const std::string& instance, const std::string& property, Value value,
                             HookRunner* runner, HookGuard* guard) {
  auto it = instances_.find(instance);
  if (it == instances_.end()) throw LookupError(instance);
  const auto domain = declared_domain(instance, property);
  if (!domain) throw DeclarationError(instance, property);
  if (!value.is_unknown() && !typecheck_value(value, *domain, *this))
    throw TypeMismatch("value " + value.to_string() + " does not fit " + domain->to_string() +
                       " for " + instance + "." + property);

  Value old_value;
  try {
    old_value = resolve_property(instance, property);
  } catch (const AmbiguityError&) {
    old_value = Value::unknown();
  }
  it->second.property_values[property] = value;

  const auto hooks = hooks_for(instance, property);
  if (hooks.empty()) return;
  HookGuard local;
  HookGuard& fired = guard ? *guard : local;
  for (const auto& fn : hooks) {
    if (!fired.emplace(fn, instance, property).second) continue;
    if (!runner) throw HookError(fn, "no hook runner attached");
    try {
      runner->run_hook(fn, instance, property, old_value, value, fired);
    } catch (const HookError&) {
      throw;
    } catch (const std::exception& e) {
      throw HookError(fn, e.what());
    }
  }
}

void Hierarchy::recheck_references(const std::string& changed, MutationReport& report) {
  for (auto& [name, rec] : instances_) {
    for (auto it = rec.property_values.begin(); it != rec.property_values.end();) {
      const bool own = name == changed;
      if (!own && !references(it->second, changed)) {
        ++it;
        continue;
      }
      const auto dom = declared_domain(name, it->first);
      std::string why;
      if (!dom)
        why = "declaration vanished";
      else if (!it->second.is_unknown() && !typecheck_value(it->second, *dom, *this))
        why = "value no longer fits " + dom->to_string();
      if (why.empty()) {
        ++it;
        continue;
      }
      report.dropped_properties.push_back(name + "." + it->first);
      report.warnings.push_back(
          {"orphaned-property", name, "dropped '" + it->first + "': " + why, "", true});
      it = rec.property_values.erase(it);
    }
  }
}

MutationReport Hierarchy::mutate_instance_concepts(const std::string& instance,
                                                   const std::vector<std::string>& add,
                                                   const std::vector<std::string>& remove) {
  require_index();
  auto& rec = this->instance(instance);
  for (const auto& c : add)
    if (!has_concept(c)) throw LookupError(c);
  for (const auto& c : remove) {
    if (!has_concept(c)) throw LookupError(c);
    if (std::find(rec.member_concepts.begin(), rec.member_concepts.end(), c) ==
        rec.member_concepts.end())
      throw Error("membership", "'" + instance + "' is not a member of '" + c + "'");
  }
  for (const auto& c : add)
    if (std::find(rec.member_concepts.begin(), rec.member_concepts.end(), c) ==
        rec.member_concepts.end())
      rec.member_concepts.push_back(c);
  for (const auto& c : remove)
    rec.member_concepts.erase(std::find(rec.member_concepts.begin(), rec.member_concepts.end(), c));

  MutationReport report;
  recheck_references(instance, report);
  return report;
}

std::set<std::string> Hierarchy::most_specialized_common_concepts(
    const std::vector<std::string>& instances) const {
  if (instances.empty()) throw std::invalid_argument("most_specialized_common_concepts: empty list");
  std::set<std::string> common = ancestors(instances.front());
  for (size_t i = 1; i < instances.size(); ++i) {
    const auto other = ancestors(instances[i]);
    std::set<std::string> kept;
    std::set_intersection(common.begin(), common.end(), other.begin(), other.end(),
                          std::inserter(kept, kept.begin()));
    common = std::move(kept);
  }
  std::set<std::string> out;
  for (const auto& c : common) {
    bool has_lower = false;
    for (const auto& d : common)
      if (d != c && concept_below(index_of(d), index_of(c))) {
        has_lower = true;
        break;
      }
    if (!has_lower) out.insert(c);
  }
  return out;
}

std::vector<std::string> Hierarchy::nearest_defining(
    const std::string& name, const std::function<bool(const ConceptNode&)>& defines) const {
  for (const auto& layer : ancestor_layers(name)) {
    std::vector<std::string> hits;
    for (const auto& c : layer) {
      auto cit = concepts_.find(c);
      if (cit != concepts_.end() && defines(cit->second)) hits.push_back(c);
    }
    if (!hits.empty()) return hits;
  }
  return {};
}

bool typecheck_value(const Value& value, const Domain& domain, const Hierarchy& graph) {
  if (value.is_unknown()) return false;
  switch (domain.kind()) {
    case Domain::Kind::Any: return true;
    case Domain::Kind::Number: return value.is(Value::Kind::Number);
    case Domain::Kind::Boolean: return value.is(Value::Kind::Boolean);
    case Domain::Kind::Text: return value.is(Value::Kind::Text);
    case Domain::Kind::Date: return value.is(Value::Kind::Date);
    case Domain::Kind::Location: return value.is(Value::Kind::Location);
    case Domain::Kind::Sequence: {
      if (!value.is(Value::Kind::Sequence)) return false;
      for (const auto& item : value.as_sequence().items)
        if (!typecheck_value(item, domain.element(), graph)) return false;
      return true;
    }
    case Domain::Kind::Concept: {
      if (!graph.has_concept(domain.concept_name())) throw LookupError(domain.concept_name());
      if (!value.is(Value::Kind::EntityRef)) return false;
      const auto& name = value.as_entity();
      return graph.contains(name) && graph.is_subconcept(name, domain.concept_name());
    }
  }
  return false;
}

namespace {

std::string strip_kind_prefix(const std::string& ref) {
  const auto colon = ref.find(':');
  return colon == std::string::npos ? ref : ref.substr(colon + 1);
}

std::vector<double> numbers(const json& arr) {
  std::vector<double> out;
  for (const auto& x : arr) {
    if (!x.is_number()) throw TypeMismatch("pose array must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Location location_from_json(const json& j) {
  try {
    if (j.is_array()) return Location{"", pose_from_array(numbers(j))};
    if (!j.is_object()) throw TypeMismatch("location must be an object or pose array");
    Location loc;
    if (j.contains("pose")) {
      loc.pose = pose_from_array(numbers(j.at("pose")));
      if (j.contains("rel") && !j.at("rel").is_null())
        loc.reference = strip_kind_prefix(j.at("rel").get<std::string>());
    } else if (j.contains("global")) {
      loc.pose = pose_from_array(numbers(j.at("global")));
    } else {
      throw TypeMismatch("location needs a 'pose' or 'global' array");
    }
    return loc;
  } catch (const std::invalid_argument& e) {
    throw TypeMismatch(std::string("bad location: ") + e.what());
  } catch (const json::exception& e) {
    throw TypeMismatch(std::string("bad location: ") + e.what());
  }
}

}  // namespace

Value value_from_json(const json& j, const Domain& domain, const Hierarchy* graph) {
  if (j.is_null()) return Value::unknown();
  auto fail = [&]() -> Value {
    throw TypeMismatch("JSON " + j.dump() + " does not fit " + domain.to_string());
  };
  switch (domain.kind()) {
    case Domain::Kind::Any:
      if (j.is_boolean()) return Value::boolean(j.get<bool>());
      if (j.is_number()) return Value::number(j.get<double>());
      if (j.is_string()) {
        const auto s = j.get<std::string>();
        return graph && graph->contains(s) ? Value::entity(s) : Value::text(s);
      }
      if (j.is_array()) {
        std::vector<Value> items;
        for (const auto& x : j) items.push_back(value_from_json(x, domain, graph));
        return Value::sequence("ValueDomain", std::move(items));
      }
      if (j.is_object() && (j.contains("pose") || j.contains("global")))
        return Value::location(location_from_json(j));
      return fail();
    case Domain::Kind::Number:
      return j.is_number() ? Value::number(j.get<double>()) : fail();
    case Domain::Kind::Boolean:
      return j.is_boolean() ? Value::boolean(j.get<bool>()) : fail();
    case Domain::Kind::Text:
      return j.is_string() ? Value::text(j.get<std::string>()) : fail();
    case Domain::Kind::Date:
      if (!j.is_string()) return fail();
      try {
        return Value::date(Date::parse(j.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw TypeMismatch(e.what());
      }
    case Domain::Kind::Location:
      return Value::location(location_from_json(j));
    case Domain::Kind::Sequence: {
      if (!j.is_array()) return fail();
      std::vector<Value> items;
      for (const auto& x : j) items.push_back(value_from_json(x, domain.element(), graph));
      return Value::sequence(domain.element().to_string(), std::move(items));
    }
    case Domain::Kind::Concept:
      return j.is_string() ? Value::entity(strip_kind_prefix(j.get<std::string>())) : fail();
  }
  return fail();
}

}  // namespace chkb
