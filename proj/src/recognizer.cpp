#include "chkb/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace chkb {

namespace {

std::string binding_key(const std::string& skill, const Bindings& b) {
  return skill + bindings_to_json(b).dump();
}

bool bound_to(const Bindings& b, const std::string& entity) {
  return std::any_of(b.begin(), b.end(), [&](const auto& kv) {
    return kv.second.is(Value::Kind::EntityRef) && kv.second.as_entity() == entity;
  });
}

}  // namespace

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Successful: return "successful";
    case Outcome::Unsuccessful: return "unsuccessful";
    case Outcome::Indeterminate: return "indeterminate";
  }
  return "?";
}

json bindings_to_json(const Bindings& b) {
  json out = json::object();
  for (const auto& [k, v] : b) out[k] = value_to_json(v);
  return out;
}

std::vector<Bindings> generate_parameter_tuples(const Hierarchy& graph, const ActDef& skill,
                                                const std::vector<std::string>& agents,
                                                const std::vector<std::string>& objects) {
  const auto params = skill.entity_params();
  std::vector<std::vector<std::string>> options;
  for (const auto* p : params) {
    std::vector<std::string> opts;
    auto consider = [&](const std::string& e) {
      if (std::find(opts.begin(), opts.end(), e) == opts.end() && entity_matches_parameter(graph, e, p->spec))
        opts.push_back(e);
    };
    for (const auto& a : agents) consider(a);
    if (p->role == ParamRole::Entity)
      for (const auto& o : objects) consider(o);
    if (opts.empty()) return {};
    options.push_back(std::move(opts));
  }
  std::vector<Bindings> out;
  Bindings current;
  std::set<std::string> used;
  std::function<void(size_t)> assign = [&](size_t i) {
    if (i == params.size()) {
      out.push_back(current);
      return;
    }
    for (const auto& e : options[i]) {
      if (used.count(e)) continue;
      used.insert(e);
      current[params[i]->name] = Value::entity(e);
      assign(i + 1);
      used.erase(e);
    }
    current.erase(params[i]->name);
  };
  assign(0);
  return out;
}

bool fill_value_params(const FunctionLibrary& functions, const ActDef& skill, Bindings& bindings, EvalContext& ctx) {
  for (const auto& p : skill.params) {
    if (p.role != ParamRole::Value || bindings.count(p.name)) continue;
    Value v;
    if (!p.extract.empty()) {
      try {
        v = functions.evaluate(p.extract, bindings, ctx).value_or(Value::unknown());
      } catch (const EvalError&) {
        v = Value::unknown();
      }
    }
    if (v.is_unknown() && !p.optional) return false;
    bindings[p.name] = v;
  }
  return true;
}

Recognizer::Recognizer(Environment& env, RecognizerOptions options) : env_(env), options_(options) {
  if (options_.debounce < 1) throw std::invalid_argument("debounce must be at least 1");
}

std::vector<SkillEvent> Recognizer::step(const Frame& frame) {
  env_.push_frame(frame);
  ++frame_index_;
  const double t = frame.timestamp;
  KnowledgeBase& kb = env_.kb();

  // Bookkeeping: re-check active skills; IV departures count as misses.
  std::vector<ActiveSkill> ended;
  std::vector<ActiveSkill> still;
  for (auto& s : active_) {
    bool miss = false;
    for (const auto& [a, g, o] : s.manipulations)
      if (!env_.iv_objects(g).count(o)) {
        miss = true;
        s.iv_exit = true;
      }
    if (!miss) {
      EvalContext ctx{&kb.graph, nullptr, &env_};
      try {
        miss = !*run_stage(kb.functions, *s.def, Stage::Check, s.bindings, ctx);
      } catch (const EvalError&) {
        miss = true;
      }
    }
    if (miss) {
      if (++s.misses >= options_.debounce) {
        ended.push_back(std::move(s));
        continue;
      }
    } else {
      s.misses = 0;
      s.last_active = t;
    }
    still.push_back(std::move(s));
  }
  active_ = std::move(still);
  for (const auto& s : ended) release(s);

  discover(t);

  std::vector<SkillEvent> out;
  for (const auto& s : ended) out.push_back(finalize(s));
  return out;
}

std::vector<Diagnostic> Recognizer::take_warnings() {
  std::vector<Diagnostic> out;
  out.swap(warnings_);
  return out;
}

std::vector<SkillEvent> Recognizer::finish() {
  std::vector<ActiveSkill> ended;
  ended.swap(active_);
  for (const auto& s : ended) release(s);
  std::vector<SkillEvent> out;
  for (const auto& s : ended) out.push_back(finalize(s));
  pending_.clear();
  return out;
}

void Recognizer::release(const ActiveSkill& s) {
  for (const auto& [a, g, o] : s.manipulations) {
    const bool still_held = std::any_of(active_.begin(), active_.end(), [&](const ActiveSkill& other) {
      return std::any_of(other.manipulations.begin(), other.manipulations.end(), [&](const Manipulation& m) {
        return std::get<1>(m) == g && std::get<2>(m) == o;
      });
    });
    if (still_held) continue;
    auto it = env_.grasped_by.find(o);
    if (it == env_.grasped_by.end()) continue;
    it->second.erase(g);
    if (it->second.empty()) env_.grasped_by.erase(it);
  }
}

SkillEvent Recognizer::finalize(const ActiveSkill& s) {
  KnowledgeBase& kb = env_.kb();
  SkillEvent ev{s.def->name, s.bindings, s.t_start, s.last_active, Outcome::Indeterminate, {}, {}, ""};
  if (s.iv_exit) ev.flags.push_back("iv_exit");
  try {
    EvalContext read{&kb.graph, nullptr, &env_};
    if (*run_stage(kb.functions, *s.def, Stage::Succ, s.bindings, read)) {
      LibraryHookRunner hooks(kb.functions, kb.graph, &env_);
      EvalContext write{&kb.graph, &kb.graph, &env_, &hooks};
      run_stage(kb.functions, *s.def, Stage::Eff, s.bindings, write);
      ++effects_applied_;
      ev.outcome = Outcome::Successful;
      ev.actions = derive_actions(kb.graph, *s.def, s.bindings);
    } else {
      ev.outcome = Outcome::Unsuccessful;
    }
  } catch (const Error& e) {
    ev.outcome = Outcome::Indeterminate;
    ev.actions.clear();
    ev.note = e.what();
  }
  timeline_.push_back(ev);
  return ev;
}

std::vector<std::string> Recognizer::pool_for(const std::string& gripper, std::vector<std::string>& agents) {
  std::vector<std::string> objects;
  for (const auto& o : env_.iv_objects(gripper)) {
    objects.push_back(o);
    auto held = env_.grasped_by.find(o);
    if (held == env_.grasped_by.end()) continue;
    for (const auto& other : held->second) {
      const std::string who = env_.agent_of(other);
      if (!who.empty() && std::find(agents.begin(), agents.end(), who) == agents.end()) agents.push_back(who);
    }
  }
  std::vector<std::string> grippers;
  for (const auto& a : agents)
    for (const auto& g : env_.grippers_of(a))
      if (std::find(grippers.begin(), grippers.end(), g) == grippers.end()) grippers.push_back(g);

  const size_t total = agents.size() + grippers.size() + objects.size();
  if (total > options_.pool_cap) {
    const auto gp = env_.global_pose(gripper);
    auto dist = [&](const std::string& o) {
      auto p = env_.global_pose(o);
      return gp && p ? (p->translation - gp->translation).norm() : INFINITY;
    };
    std::stable_sort(objects.begin(), objects.end(),
                     [&](const std::string& x, const std::string& y) { return dist(x) < dist(y); });
    const size_t room = options_.pool_cap > agents.size() + grippers.size() ? options_.pool_cap - agents.size() - grippers.size() : 0;
    objects.resize(std::min(objects.size(), room));
    std::sort(objects.begin(), objects.end());
    if (capped_.insert(gripper).second)
      warnings_.push_back({"recognizer", gripper, "entity pool capped at " + std::to_string(options_.pool_cap), "", true});
  }
  grippers.insert(grippers.end(), objects.begin(), objects.end());
  return grippers;
}

void Recognizer::discover(double t) {
  KnowledgeBase& kb = env_.kb();
  std::set<std::string> evaluated;
  for (const auto& a : env_.agents()) {
    for (const auto& g : env_.grippers_of(a)) {
      std::vector<std::string> agents{a};
      const auto objects = pool_for(g, agents);
      std::set<std::string> skills;
      for (const auto& [def, params] : merge_affordances(kb.graph, {a, g}, kb.acts))
        if (kb.acts.def(def).is_skill) skills.insert(def);

      for (const auto& name : skills) {
        const ActDef& skill = kb.acts.def(name);
        for (auto b : generate_parameter_tuples(kb.graph, skill, agents, objects)) {
          if (!bound_to(b, a) || !bound_to(b, g)) continue;
          std::vector<Manipulation> manips;
          try {
            manips = manipulations_of(skill, b);
          } catch (const Error&) {
            continue;
          }
          if (!std::all_of(manips.begin(), manips.end(), [&](const Manipulation& m) {
                return env_.iv_objects(std::get<1>(m)).count(std::get<2>(m)) > 0;
              }))
            continue;
          const std::string entity_key = binding_key(name, b);
          if (!evaluated.insert(entity_key).second) continue;
          if (std::any_of(active_.begin(), active_.end(), [&](const ActiveSkill& s) {
                return s.def == &skill && binding_key(name, s.bindings) == binding_key(name, b);
              }))
            continue;

          EvalContext ctx{&kb.graph, nullptr, &env_};
          if (!fill_value_params(kb.functions, skill, b, ctx)) continue;
          const std::string key = binding_key(name, b);
          if (std::any_of(active_.begin(), active_.end(), [&](const ActiveSkill& s) {
                return s.def == &skill && binding_key(name, s.bindings) == key;
              }))
            continue;

          bool passes = false;
          try {
            passes = *run_stage(kb.functions, skill, Stage::Pre, b, ctx) &&
                     *run_stage(kb.functions, skill, Stage::Check, b, ctx);
          } catch (const EvalError& e) {
            if (e.tag() == "unknown-input" && indeterminate_seen_.insert(key).second) {
              SkillEvent ev{name, b, t, t, Outcome::Indeterminate, {}, {"candidate"}, e.what()};
              timeline_.push_back(std::move(ev));
            }
          }
          if (!passes) {
            pending_.erase(key);
            continue;
          }
          auto& p = pending_[key];
          if (p.count > 0 && p.last_frame + 1 == frame_index_) {
            ++p.count;
          } else {
            p.count = 1;
            p.start = t;
          }
          p.last_frame = frame_index_;
          if (p.count < options_.debounce) continue;

          ActiveSkill s{&skill, b, p.start, t, 0, false, manips};
          for (const auto& [ma, mg, mo] : manips) env_.grasped_by[mo].insert(mg);
          active_.push_back(std::move(s));
          pending_.erase(key);
        }
      }
    }
  }
  for (auto it = pending_.begin(); it != pending_.end();)
    it = it->second.last_frame == frame_index_ ? std::next(it) : pending_.erase(it);
}

json export_events(const std::vector<SkillEvent>& events) {
  json out = json::array();
  for (const auto& e : events) {
    json actions = json::array();
    for (const auto& a : e.actions) actions.push_back({{"action", a.action}, {"params", bindings_to_json(a.params)}});
    json ev = {{"skill", e.skill},   {"params", bindings_to_json(e.params)},
               {"t_start", e.t_start}, {"t_end", e.t_end},
               {"outcome", outcome_name(e.outcome)}, {"actions", actions}};
    if (!e.flags.empty()) ev["flags"] = e.flags;
    out.push_back(std::move(ev));
  }
  return out;
}

std::string export_lanes(const std::vector<SkillEvent>& events, const Hierarchy& graph) {
  std::map<std::string, std::vector<const SkillEvent*>> lanes;
  for (const auto& e : events) {
    bool placed = false;
    for (const auto& [k, v] : e.params)
      if (v.is(Value::Kind::EntityRef) && graph.has_concept("Gripper") && graph.has_instance(v.as_entity()) &&
          graph.is_subconcept(v.as_entity(), "Gripper")) {
        lanes[v.as_entity()].push_back(&e);
        placed = true;
      }
    if (!placed) lanes["(no gripper)"].push_back(&e);
  }
  std::ostringstream os;
  for (auto& [lane, list] : lanes) {
    std::stable_sort(list.begin(), list.end(),
                     [](const SkillEvent* x, const SkillEvent* y) { return x->t_start < y->t_start; });
    os << lane << ":";
    for (const auto* e : list) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " [%.2f-%.2f]", e->t_start, e->t_end);
      os << buf << " " << e->skill << "(" << outcome_name(e->outcome) << ")";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace chkb
