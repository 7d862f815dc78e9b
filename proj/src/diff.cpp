#include "chkb/diff.hpp"

#include <algorithm>
#include <functional>

namespace chkb {

namespace {

bool same_value(const Value& va, const Hierarchy& ga, const Value& vb, const Hierarchy& gb, const DiffTolerance& tol) {
  if (va.is_unknown() || vb.is_unknown()) return va.is_unknown() && vb.is_unknown();
  if (va.is(Value::Kind::Location) && vb.is(Value::Kind::Location)) {
    const double angle = tol.angle_deg * M_PI / 180.0;
    // Same reference: the stored value moves with its anchor, so compare it as stored.
    if (va.as_location().reference == vb.as_location().reference)
      return near(va.as_location().pose, vb.as_location().pose, tol.translation, angle);
    StaticWorld wa(ga), wb(gb);
    auto pa = globalize(wa, va.as_location());
    auto pb = globalize(wb, vb.as_location());
    if (pa && pb) return near(*pa, *pb, tol.translation, angle);
    return va == vb;
  }
  if (va.is(Value::Kind::Sequence) && vb.is(Value::Kind::Sequence))
    return multiset_equal(va.as_sequence().items, vb.as_sequence().items);
  return va == vb;
}

std::optional<Value> try_resolve(const Hierarchy& g, const std::string& instance, const std::string& prop) {
  try {
    return g.resolve_property(instance, prop);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<Value> seq_items(const Value& v) {
  return v.is(Value::Kind::Sequence) ? v.as_sequence().items : std::vector<Value>{};
}

std::string unit_key(const std::string& instance, const std::string& prop) { return instance + "\n" + prop; }
std::string unit_key(const std::string& instance, const std::string& prop, char sign, const Value& element) {
  return instance + "\n" + prop + "\n" + sign + value_key(element);
}

struct Candidate {
  ActionInstance action;
  std::map<std::string, int> covers;
  std::string order_key;
};

std::string action_key(const ActionInstance& a) {
  json params = json::object();
  for (const auto& [k, v] : a.params) params[k] = value_to_json(v);
  return a.action + params.dump();
}

}  // namespace

Hierarchy make_state(const Hierarchy& base, const std::map<std::string, InstanceRecord>& instances) {
  Hierarchy out;
  for (const auto& [name, node] : base.concepts()) out.add_concept(node);
  for (const auto& [name, rec] : instances) out.add_instance(rec);
  out.rebuild_index();
  return out;
}

std::vector<PropertyChange> changed_properties(const Hierarchy& a, const Hierarchy& b, const DiffTolerance& tol) {
  std::vector<PropertyChange> out;
  for (const auto& [name, rec] : a.instances()) {
    if (!b.has_instance(name)) continue;
    std::set<std::string> props;
    for (const auto& [p, d] : a.declared_properties(name)) props.insert(p);
    for (const auto& [p, d] : b.declared_properties(name)) props.insert(p);
    for (const auto& p : props) {
      auto va = try_resolve(a, name, p);
      auto vb = try_resolve(b, name, p);
      if (!va || !vb) continue;
      if (!same_value(*va, a, *vb, b, tol)) out.push_back({name, p, *va, *vb});
    }
  }
  return out;
}

Hierarchy apply_actions(const KnowledgeBase& kb, const Hierarchy& state, const std::vector<ActionInstance>& actions) {
  Hierarchy sim = state;
  StaticWorld world(sim);
  for (const auto& a : actions) {
    EvalContext ctx{&sim, &sim, &world};
    run_stage(kb.functions, kb.acts.def(a.action), Stage::Eff, a.params, ctx);
  }
  return sim;
}

DiffResult diff_environments(const KnowledgeBase& kb, const Hierarchy& a, const Hierarchy& b, const DiffTolerance& tol) {
  DiffResult result;
  for (const auto& [name, rec] : a.instances())
    if (!b.has_instance(name)) result.missing_instances.push_back(name);
  for (const auto& [name, rec] : b.instances())
    if (!a.has_instance(name)) result.missing_instances.push_back(name);

  const auto changes = changed_properties(a, b, tol);
  std::map<std::string, int> need;
  std::map<std::string, size_t> unit_change;
  std::set<std::string> changed_instances;
  std::map<std::string, std::set<std::string>> changed_by_prop;
  for (size_t i = 0; i < changes.size(); ++i) {
    const auto& c = changes[i];
    changed_instances.insert(c.instance);
    changed_by_prop[c.property].insert(c.instance);
    if (c.before.is(Value::Kind::Sequence) || c.after.is(Value::Kind::Sequence)) {
      const auto before = seq_items(c.before), after = seq_items(c.after);
      for (const auto& e : multiset_minus(after, before)) {
        const auto k = unit_key(c.instance, c.property, '+', e);
        ++need[k];
        unit_change[k] = i;
      }
      for (const auto& e : multiset_minus(before, after)) {
        const auto k = unit_key(c.instance, c.property, '-', e);
        ++need[k];
        unit_change[k] = i;
      }
    } else {
      const auto k = unit_key(c.instance, c.property);
      need[k] = 1;
      unit_change[k] = i;
    }
  }

  std::vector<Candidate> candidates;
  std::set<std::string> seen_candidates;
  for (const ActDef* action : kb.acts.actions()) {
    auto eff = action->stages.find(Stage::Eff);
    if (eff == action->stages.end()) continue;
    const FunctionDef& fn = kb.functions.def(eff->second);
    if (!fn.procedure) continue;

    std::map<std::string, std::set<std::string>> targets;  // param -> properties
    for (const auto& t : FunctionLibrary::assign_targets(*fn.procedure))
      if (t.path.size() == 1) targets[t.name].insert(t.path.front());
    std::map<std::string, ProcRef> reconstruct;  // value param -> the property it is written to
    for_each_call(*fn.procedure, [&](const ProcCall& c) {
      if (c.function != "Assign") return;
      const auto& who = c.args.at(0).second;
      const auto& what = c.args.at(1).second;
      if (who.is_ref() && who.ref().path.size() == 1 && what.is_ref() && what.ref().path.empty())
        reconstruct.emplace(what.ref().name, who.ref());
    });

    const auto entity_params = action->entity_params();
    std::vector<std::vector<std::string>> options;
    for (const auto* p : entity_params) {
      std::vector<std::string> opts;
      for (const auto& inst : changed_instances) {
        if (!entity_matches_parameter(a, inst, p->spec)) continue;
        auto t = targets.find(p->name);
        if (t != targets.end() &&
            std::none_of(t->second.begin(), t->second.end(),
                         [&](const std::string& prop) { return changed_by_prop[prop].count(inst) > 0; }))
          continue;
        opts.push_back(inst);
      }
      options.push_back(std::move(opts));
    }

    Bindings binding;
    std::set<std::string> used;
    std::function<void(size_t)> enumerate = [&](size_t i) {
      if (i < entity_params.size()) {
        for (const auto& inst : options[i]) {
          if (used.count(inst)) continue;
          used.insert(inst);
          binding[entity_params[i]->name] = Value::entity(inst);
          enumerate(i + 1);
          used.erase(inst);
        }
        binding.erase(entity_params[i]->name);
        return;
      }
      Bindings full = binding;
      for (const auto& p : action->params) {
        if (p.role != ParamRole::Value) continue;
        Value v;
        auto r = reconstruct.find(p.name);
        if (r != reconstruct.end()) {
          auto owner = full.find(r->second.name);
          if (owner != full.end() && owner->second.is(Value::Kind::EntityRef))
            v = try_resolve(b, owner->second.as_entity(), r->second.path.front()).value_or(Value::unknown());
        }
        full[p.name] = v;
      }
      ActionInstance inst{action->name, full};
      const std::string key = action_key(inst);
      if (!seen_candidates.insert(key).second) return;

      EvalContext read{&a, nullptr, nullptr};
      StaticWorld wa(a);
      read.world = &wa;
      try {
        if (run_stage(kb.functions, *action, Stage::Pre, full, read) == false) return;
      } catch (const EvalError&) {
        // Unverifiable preconditions do not rule the candidate out.
      }
      Hierarchy sim = a;
      try {
        StaticWorld ws(sim);
        EvalContext ctx{&sim, &sim, &ws};
        run_stage(kb.functions, *action, Stage::Eff, full, ctx);
      } catch (const Error&) {
        return;
      }

      Candidate cand{inst, {}, key};
      for (const auto& [param, props] : targets) {
        auto bound = full.find(param);
        if (bound == full.end() || !bound->second.is(Value::Kind::EntityRef)) return;
        const std::string& who = bound->second.as_entity();
        for (const auto& prop : props) {
          auto va = try_resolve(a, who, prop), vs = try_resolve(sim, who, prop), vb = try_resolve(b, who, prop);
          if (!va || !vs || !vb) return;
          if (va->is(Value::Kind::Sequence) || vb->is(Value::Kind::Sequence) || vs->is(Value::Kind::Sequence)) {
            const auto ia = seq_items(*va), is = seq_items(*vs), ib = seq_items(*vb);
            const auto added = multiset_minus(is, ia), removed = multiset_minus(ia, is);
            if (added.empty() && removed.empty()) return;
            if (!multiset_minus(added, multiset_minus(ib, ia)).empty()) return;
            if (!multiset_minus(removed, multiset_minus(ia, ib)).empty()) return;
            for (const auto& e : added) ++cand.covers[unit_key(who, prop, '+', e)];
            for (const auto& e : removed) ++cand.covers[unit_key(who, prop, '-', e)];
          } else {
            if (!same_value(*vs, sim, *vb, b, tol) || same_value(*vs, sim, *va, a, tol)) return;
            cand.covers[unit_key(who, prop)] = 1;
          }
        }
      }
      if (!cand.covers.empty()) candidates.push_back(std::move(cand));
    };
    enumerate(0);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) { return x.order_key < y.order_key; });

  // Units no candidate can produce are unexplained up front.
  std::set<std::string> skipped;
  for (const auto& [k, n] : need) {
    bool coverable = std::any_of(candidates.begin(), candidates.end(),
                                 [&](const Candidate& c) { return c.covers.count(k) > 0; });
    if (!coverable) skipped.insert(k);
  }
  for (const auto& k : skipped) need.erase(k);

  // Minimum exact cover, allowing units to be left unexplained at a higher cost.
  std::vector<size_t> chosen, best;
  std::set<std::string> left, best_left;
  size_t best_cost_left = SIZE_MAX, best_count = SIZE_MAX;
  size_t budget = 500000;
  std::function<void()> search = [&]() {
    if (budget == 0) return;
    --budget;
    if (left.size() > best_cost_left || (left.size() == best_cost_left && chosen.size() >= best_count)) return;
    auto open = std::find_if(need.begin(), need.end(), [](const auto& kv) { return kv.second > 0; });
    if (open == need.end()) {
      best_cost_left = left.size();
      best_count = chosen.size();
      best = chosen;
      best_left = left;
      return;
    }
    const std::string unit = open->first;
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
      const auto& c = candidates[ci];
      if (!c.covers.count(unit)) continue;
      bool fits = std::all_of(c.covers.begin(), c.covers.end(), [&](const auto& kv) {
        auto it = need.find(kv.first);
        return it != need.end() && it->second >= kv.second;
      });
      if (!fits) continue;
      for (const auto& [k, n] : c.covers) need[k] -= n;
      chosen.push_back(ci);
      search();
      chosen.pop_back();
      for (const auto& [k, n] : c.covers) need[k] += n;
    }
    const int count = open->second;
    open->second = 0;
    left.insert(unit);
    search();
    left.erase(unit);
    need[unit] = count;
  };
  search();

  for (size_t ci : best) result.actions.push_back(candidates[ci].action);
  std::sort(result.actions.begin(), result.actions.end(),
            [](const ActionInstance& x, const ActionInstance& y) { return action_key(x) < action_key(y); });
  std::set<size_t> unexplained;
  for (const auto& k : skipped) unexplained.insert(unit_change.at(k));
  for (const auto& k : best_left) unexplained.insert(unit_change.at(k));
  for (size_t i : unexplained) result.unexplained.push_back(changes[i]);
  return result;
}

}  // namespace chkb
