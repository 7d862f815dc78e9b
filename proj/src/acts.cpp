#include "chkb/acts.hpp"

#include <algorithm>
#include <functional>

namespace chkb {

namespace {

const std::map<std::string, Stage> kStageKeys = {
    {"preconditions", Stage::Pre}, {"check", Stage::Check}, {"success", Stage::Succ}, {"effects", Stage::Eff}};

struct Inherited {
  std::string owner;
  json doc;
};

// Nearest definition of `key` in the data blocks above `name`; equal-distance
// definitions that disagree are reported as CH020.
std::optional<Inherited> inherited(const Hierarchy& graph, const std::string& name, const std::string& key,
                                   std::vector<Diagnostic>& diags) {
  auto hits = graph.nearest_defining(name, [&](const ConceptNode& n) { return n.raw_data.contains(key); });
  if (hits.empty()) return std::nullopt;
  const json& first = graph.concept_node(hits.front()).raw_data.at(key);
  for (size_t i = 1; i < hits.size(); ++i)
    if (graph.concept_node(hits[i]).raw_data.at(key) != first) {
      diags.push_back({"CH020", name, "'" + key + "' inherited ambiguously from " + hits.front() + " and " + hits[i],
                       "/concepts/" + name + "/data"});
      break;
    }
  return Inherited{hits.front(), first};
}

std::vector<std::string> string_list(const json& j) {
  std::vector<std::string> out;
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_array()) {
    for (const auto& x : j) {
      if (!x.is_string()) throw std::invalid_argument("expected a list of concept names");
      out.push_back(x.get<std::string>());
    }
  } else {
    throw std::invalid_argument("expected a concept name or a list of them");
  }
  return out;
}

ParamDef parse_entity_param(const std::string& name, ParamRole role, const json& j) {
  ParamDef p;
  p.name = name;
  p.role = role;
  if (j.is_object()) {
    if (!j.contains("concepts")) throw std::invalid_argument("parameter '" + name + "' needs 'concepts'");
    p.spec.required = string_list(j.at("concepts"));
    if (j.contains("restrictions")) p.spec.restricted = string_list(j.at("restrictions"));
  } else {
    p.spec.required = string_list(j);
  }
  if (p.spec.required.empty()) throw std::invalid_argument("parameter '" + name + "' requires at least one concept");
  p.domain = Domain::concept_ref(p.spec.required.front());
  return p;
}

ParamDef parse_value_param(const std::string& name, const json& j) {
  ParamDef p;
  p.name = name;
  p.role = ParamRole::Value;
  if (j.is_string()) {
    p.domain = Domain::parse(j.get<std::string>());
    return p;
  }
  if (!j.is_object() || !j.contains("domain") || !j.at("domain").is_string())
    throw std::invalid_argument("parameter '" + name + "' needs a 'domain'");
  p.domain = Domain::parse(j.at("domain").get<std::string>());
  p.optional = j.value("optional", false);
  return p;
}

std::vector<std::string> split_dots(const std::string& s) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    auto dot = s.find('.', start);
    parts.push_back(s.substr(start, dot - start));
    if (dot == std::string::npos) return parts;
    start = dot + 1;
  }
}

bool concept_exists_in_domain(const Domain& d, const Hierarchy& graph) {
  if (d.kind() == Domain::Kind::Sequence) return concept_exists_in_domain(d.element(), graph);
  return !d.is_entity() || graph.has_concept(d.concept_name());
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Pre: return "preconditions";
    case Stage::Check: return "check";
    case Stage::Succ: return "success";
    case Stage::Eff: return "effects";
  }
  return "?";
}

const ParamDef* ActDef::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<const ParamDef*> ActDef::entity_params() const {
  std::vector<const ParamDef*> out;
  for (const auto& p : params)
    if (p.role != ParamRole::Value) out.push_back(&p);
  return out;
}

const ActDef& ActsLibrary::def(const std::string& name) const {
  auto it = defs_.find(name);
  if (it == defs_.end()) throw LookupError(name);
  return it->second;
}

std::vector<const ActDef*> ActsLibrary::skills() const {
  std::vector<const ActDef*> out;
  for (const auto& [name, d] : defs_)
    if (d.is_skill) out.push_back(&d);
  return out;
}

std::vector<const ActDef*> ActsLibrary::actions() const {
  std::vector<const ActDef*> out;
  for (const auto& [name, d] : defs_)
    if (!d.is_skill) out.push_back(&d);
  return out;
}

std::vector<Diagnostic> ActsLibrary::load(const Hierarchy& graph, FunctionLibrary& functions) {
  defs_.clear();
  std::vector<Diagnostic> diags;
  std::map<std::string, std::map<std::string, json>> raw_assocs;

  for (const auto& [name, node] : graph.concepts()) {
    if (node.kind != ConceptKind::Skill && node.kind != ConceptKind::Action) continue;
    const bool skill = node.kind == ConceptKind::Skill;
    const std::string ptr = "/concepts/" + name + "/data";
    auto diag = [&](const char* code, const std::string& msg, const std::string& where = "") {
      diags.push_back({code, name, msg, ptr + where});
    };
    ActDef def;
    def.name = name;
    def.is_skill = skill;

    // Parameters: union over the ancestry, nearest definition of a name wins.
    std::set<std::string> seen;
    std::vector<ParamDef> agents, entities, values;
    bool bad = false;
    for (const auto& layer : graph.ancestor_layers(name))
      for (const auto& c : layer) {
        const json& data = graph.concept_node(c).raw_data;
        for (const char* key : {"agents", "entities", "parameters"}) {
          if (!data.contains(key)) continue;
          if (!data.at(key).is_object()) {
            if (c == name) diag("CH019", std::string("'") + key + "' must be an object", std::string("/") + key);
            bad = true;
            continue;
          }
          for (const auto& [pname, spec] : data.at(key).items()) {
            if (!seen.insert(pname).second) continue;
            try {
              if (std::string(key) == "parameters") {
                ParamDef p = parse_value_param(pname, spec);
                if (!concept_exists_in_domain(p.domain, graph))
                  throw std::invalid_argument("unknown domain '" + p.domain.to_string() + "'");
                values.push_back(std::move(p));
              } else {
                ParamDef p = parse_entity_param(pname, std::string(key) == "agents" ? ParamRole::Agent : ParamRole::Entity,
                                                spec);
                for (const auto& l : {p.spec.required, p.spec.restricted})
                  for (const auto& cn : l)
                    if (!graph.has_concept(cn)) throw std::invalid_argument("unknown concept '" + cn + "'");
                for (const auto& r : p.spec.restricted)
                  if (std::find(p.spec.required.begin(), p.spec.required.end(), r) != p.spec.required.end())
                    throw std::invalid_argument("'" + r + "' is both required and restricted");
                (p.role == ParamRole::Agent ? agents : entities).push_back(std::move(p));
              }
            } catch (const std::invalid_argument& e) {
              diags.push_back({"CH019", name, e.what(), "/concepts/" + c + "/data/" + key + "/" + pname});
              bad = true;
            }
          }
        }
      }
    if (bad) continue;
    if (skill && agents.empty()) {
      if (!entities.empty() || !values.empty()) diag("CH017", "skill has parameters but no agent");
      continue;  // abstract skill concept
    }
    if (!skill) {
      if (!agents.empty()) diag("CH017", "actions are agent-free", "/agents");
      if (entities.empty()) continue;  // abstract action concept
    }
    for (auto* group : {&agents, &entities, &values})
      for (auto& p : *group) def.params.push_back(std::move(p));

    // Stage functions.
    Signature stage_sig;
    for (const auto& p : def.params) {
      stage_sig.arguments.push_back(p.name);
      stage_sig.domains.emplace(p.name, p.domain);
    }
    for (const auto& [key, stage] : kStageKeys) {
      if (!skill && (stage == Stage::Check || stage == Stage::Succ)) continue;
      auto found = inherited(graph, name, key, diags);
      if (!found) continue;
      const bool predicate = stage != Stage::Eff;
      if (found->doc.is_string()) {
        const auto fn = found->doc.get<std::string>();
        if (!functions.has(fn)) {
          diag("CH017", std::string(key) + " names unknown function '" + fn + "'", "/" + std::string(key));
          continue;
        }
        const auto& fsig = functions.def(fn).signature;
        bool ok = true;
        for (const auto& a : fsig.arguments)
          if (!def.param(a)) {
            diag("CH017", std::string(key) + " function '" + fn + "' takes '" + a + "', which is not a parameter",
                 "/" + std::string(key));
            ok = false;
          }
        if (predicate && !(fsig.result && fsig.result->kind() == Domain::Kind::Boolean)) {
          diag("CH017", std::string(key) + " function '" + fn + "' must return Boolean", "/" + std::string(key));
          ok = false;
        }
        if (!predicate && fsig.result) {
          diag("CH017", "effects function '" + fn + "' must not return a value", "/" + std::string(key));
          ok = false;
        }
        if (ok) def.stages[stage] = fn;
        continue;
      }
      Signature s = stage_sig;
      if (predicate) s.result = Domain::boolean();
      const std::string fname = name + "." + key;
      try {
        functions.add_synthesized(fname, s, found->doc, name, graph);
        def.stages[stage] = fname;
      } catch (const DefinitionError& e) {
        diag("CH017", std::string(key) + ": " + e.what(), "/" + std::string(key));
      }
    }

    // Extraction functions of value parameters.
    for (auto& p : def.params) {
      if (p.role != ParamRole::Value) continue;
      auto hits = graph.nearest_defining(name, [&](const ConceptNode& n) {
        return n.raw_data.contains("parameters") && n.raw_data.at("parameters").is_object() &&
               n.raw_data.at("parameters").contains(p.name);
      });
      const json& spec = graph.concept_node(hits.front()).raw_data.at("parameters").at(p.name);
      if (!spec.is_object() || !spec.contains("extract")) continue;
      Signature s;
      for (const auto* e : def.entity_params()) {
        s.arguments.push_back(e->name);
        s.domains.emplace(e->name, e->domain);
      }
      s.result = p.domain;
      const std::string fname = name + ".extract." + p.name;
      try {
        functions.add_synthesized(fname, s, spec.at("extract"), name, graph);
        p.extract = fname;
      } catch (const DefinitionError& e) {
        diag("CH019", "extract of '" + p.name + "': " + e.what(), "/parameters/" + p.name + "/extract");
      }
    }

    if (skill) {
      if (auto m = inherited(graph, name, "manipulations", diags)) {
        std::set<std::pair<std::string, std::string>> pairs;
        if (!m->doc.is_array()) diag("CH017", "manipulations must be a list of triples", "/manipulations");
        for (const auto& t : m->doc.is_array() ? m->doc : json::array()) {
          if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() || !t[2].is_string()) {
            diag("CH017", "manipulation must be [agent, gripper, object]", "/manipulations");
            continue;
          }
          ManipulationTemplate mt{t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()};
          const ParamDef* a = def.param(mt.agent);
          const ParamDef* g = def.param(mt.gripper);
          const ParamDef* o = def.param(mt.object);
          if (!a || a->role != ParamRole::Agent || !g || g->role == ParamRole::Value || !o ||
              o->role == ParamRole::Value) {
            diag("CH017", "manipulation names must be an agent and two entity parameters", "/manipulations");
            continue;
          }
          if (!pairs.emplace(mt.agent, mt.gripper).second) {
            diag("CH017", "two manipulations share (" + mt.agent + ", " + mt.gripper + ")", "/manipulations");
            continue;
          }
          def.manipulations.push_back(mt);
        }
      }
      if (auto assoc = inherited(graph, name, "actionAssociations", diags)) {
        if (!assoc->doc.is_array())
          diag("CH018", "actionAssociations must be a list", "/actionAssociations");
        else
          for (const auto& a : assoc->doc) {
            if (!a.is_object() || !a.contains("action") || !a.at("action").is_string() || !a.contains("mapping") ||
                !a.at("mapping").is_object()) {
              diag("CH018", "association needs 'action' and a 'mapping' object", "/actionAssociations");
              continue;
            }
            ActionAssociation aa{a.at("action").get<std::string>(), {}};
            for (const auto& [k, v] : a.at("mapping").items()) {
              if (!v.is_string()) {
                diag("CH018", "mapping of '" + k + "' must be a parameter name", "/actionAssociations");
                continue;
              }
              aa.mapping[k] = v.get<std::string>();
            }
            def.associations.push_back(std::move(aa));
          }
      }
      if (auto bt = inherited(graph, name, "bt", diags)) def.bt = bt->doc;
    }
    defs_[name] = std::move(def);
  }

  // Cross-definition checks need every definition parsed.
  for (const auto& [name, def] : defs_) {
    const std::string ptr = "/concepts/" + name + "/data";
    for (const auto& aa : def.associations) {
      auto target = defs_.find(aa.action);
      if (target == defs_.end() || target->second.is_skill) {
        diags.push_back({"CH018", name, "associated action '" + aa.action + "' is not a loaded action",
                         ptr + "/actionAssociations"});
        continue;
      }
      for (const auto& [k, v] : aa.mapping) {
        if (!target->second.param(k))
          diags.push_back({"CH018", name, "'" + aa.action + "' has no parameter '" + k + "'", ptr + "/actionAssociations"});
        if (!def.param(split_dots(v).front()))
          diags.push_back({"CH018", name, "mapping source '" + v + "' is not a parameter of " + name,
                           ptr + "/actionAssociations"});
      }
      for (const auto* p : target->second.entity_params())
        if (!aa.mapping.count(p->name))
          diags.push_back({"CH018", name, "mapping to '" + aa.action + "' leaves '" + p->name + "' unmapped",
                           ptr + "/actionAssociations"});
    }
    if (!def.is_skill) {
      auto eff = def.stages.find(Stage::Eff);
      if (eff != def.stages.end() && functions.def(eff->second).procedure) {
        std::map<std::string, std::set<std::string>> touched;
        for (const auto& t : FunctionLibrary::assign_targets(*functions.def(eff->second).procedure))
          touched[t.name].insert(t.to_string());
        for (const auto& [param, props] : touched)
          if (props.size() > 1)
            diags.push_back({"CH017", name, "action effects change more than one property of '" + param + "'",
                             ptr + "/effects"});
      }
    }
  }
  return diags;
}

bool entity_matches_parameter(const Hierarchy& graph, const std::string& entity, const ParamSpec& spec) {
  for (const auto& c : spec.required)
    if (!graph.is_subconcept(entity, c)) return false;
  for (const auto& c : spec.restricted)
    if (graph.is_subconcept(entity, c)) return false;
  return true;
}

Affordance affordances(const Hierarchy& graph, const std::string& entity, const ActsLibrary& acts) {
  Affordance out;
  for (const auto& [name, def] : acts.defs())
    for (const auto* p : def.entity_params())
      if (entity_matches_parameter(graph, entity, p->spec)) out.emplace(name, p->name);
  return out;
}

std::set<std::pair<std::string, std::vector<std::string>>> merge_affordances(
    const Hierarchy& graph, const std::vector<std::string>& entities, const ActsLibrary& acts) {
  std::set<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& [name, def] : acts.defs()) {
    std::vector<std::vector<std::string>> options(entities.size());
    bool possible = true;
    for (size_t i = 0; i < entities.size() && possible; ++i) {
      for (const auto* p : def.entity_params())
        if (entity_matches_parameter(graph, entities[i], p->spec)) options[i].push_back(p->name);
      possible = !options[i].empty();
    }
    if (!possible) continue;
    std::vector<std::string> chosen;
    std::set<std::string> used;
    std::function<void(size_t)> pick = [&](size_t i) {
      if (i == entities.size()) {
        out.emplace(name, chosen);
        return;
      }
      for (const auto& p : options[i]) {
        if (used.count(p)) continue;
        used.insert(p);
        chosen.push_back(p);
        pick(i + 1);
        chosen.pop_back();
        used.erase(p);
      }
    };
    pick(0);
  }
  return out;
}

bool bindings_match(const Hierarchy& graph, const ActDef& def, const Bindings& bindings) {
  for (const auto* p : def.entity_params()) {
    auto it = bindings.find(p->name);
    if (it == bindings.end() || !it->second.is(Value::Kind::EntityRef)) return false;
    if (!graph.contains(it->second.as_entity())) return false;
    if (!entity_matches_parameter(graph, it->second.as_entity(), p->spec)) return false;
  }
  return true;
}

std::optional<bool> run_stage(const FunctionLibrary& functions, const ActDef& def, Stage stage,
                              const Bindings& bindings, EvalContext& ctx) {
  auto it = def.stages.find(stage);
  if (it == def.stages.end()) return stage == Stage::Eff ? std::nullopt : std::optional<bool>(true);
  const FunctionDef& fn = functions.def(it->second);
  Bindings args;
  for (const auto& a : fn.signature.arguments) {
    auto b = bindings.find(a);
    args[a] = b == bindings.end() ? Value::unknown() : b->second;
  }
  std::optional<Value> result;
  try {
    result = functions.evaluate(it->second, args, ctx);
  } catch (const EvalError& e) {
    throw EvalError(e.tag(), def.name + " " + stage_name(stage) + ": " + e.what());
  }
  if (stage == Stage::Eff) return std::nullopt;
  if (!result || result->is_unknown())
    throw EvalError("unknown-input", def.name + " " + stage_name(stage) + " evaluated to UNKNOWN");
  if (!result->is(Value::Kind::Boolean))
    throw EvalError("type-mismatch", def.name + " " + stage_name(stage) + " returned " + result->to_string());
  return result->as_boolean();
}

std::vector<Manipulation> manipulations_of(const ActDef& skill, const Bindings& bindings) {
  auto entity = [&](const std::string& param) {
    auto it = bindings.find(param);
    if (it == bindings.end() || !it->second.is(Value::Kind::EntityRef))
      throw EvalError("unbound-argument", "manipulation parameter '" + param + "' of " + skill.name + " is unbound");
    return it->second.as_entity();
  };
  std::vector<Manipulation> out;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& m : skill.manipulations) {
    Manipulation t{entity(m.agent), entity(m.gripper), entity(m.object)};
    if (!pairs.emplace(std::get<0>(t), std::get<1>(t)).second)
      throw DefinitionError(skill.name + ": two manipulations use gripper '" + std::get<1>(t) + "' of '" +
                            std::get<0>(t) + "'");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ActionInstance> derive_actions(const Hierarchy& graph, const ActDef& skill, const Bindings& bindings) {
  std::vector<ActionInstance> out;
  for (const auto& aa : skill.associations) {
    ActionInstance inst{aa.action, {}};
    for (const auto& [param, source] : aa.mapping) {
      const auto parts = split_dots(source);
      auto it = bindings.find(parts.front());
      if (it == bindings.end())
        throw EvalError("unbound-argument", skill.name + " -> " + aa.action + ": '" + parts.front() + "' is unbound");
      Value v = it->second;
      for (size_t i = 1; i < parts.size(); ++i) {
        if (!v.is(Value::Kind::EntityRef) || !graph.has_instance(v.as_entity())) {
          v = Value::unknown();
          break;
        }
        v = graph.resolve_property(v.as_entity(), parts[i]);
      }
      inst.params[param] = v;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace chkb
