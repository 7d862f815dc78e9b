#include <algorithm>
#include <cmath>

#include "chkb/functions.hpp"

namespace chkb {

namespace {

using Args = std::vector<Value>;

Signature sig(std::vector<std::pair<std::string, std::string>> params, std::optional<std::string> res) {
  Signature s;
  for (auto& [name, dom] : params) {
    s.arguments.push_back(name);
    s.domains.emplace(name, Domain::parse(dom));
  }
  if (res) s.result = Domain::parse(*res);
  return s;
}

NativeBuiltin native(Signature s, NativeFn fn, bool accepts_unknown = false) {
  return NativeBuiltin{std::move(s), std::move(fn), accepts_unknown};
}

// Geometric builtins fall back to stored locations when no live world is attached.
template <class F>
auto with_world(const EvalContext& ctx, F&& f) {
  if (ctx.world) return f(*ctx.world);
  StaticWorld fallback(*ctx.graph);
  return f(static_cast<const World&>(fallback));
}

Pose pose_of(const World& w, const Value& entity) {
  auto p = w.global_pose(entity.as_entity());
  if (!p) throw EvalError("unknown-input", "no pose known for '" + entity.as_entity() + "'");
  return *p;
}

using NumOp = double (*)(double, double);
NativeBuiltin arithmetic(NumOp op) {
  return native(sig({{"arg1", "Number"}, {"arg2", "Number"}}, "Number"),
                [op](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                  return Value::number(op(a[0].as_number(), a[1].as_number()));
                });
}

using CmpOp = bool (*)(double, double);
NativeBuiltin comparison(CmpOp op) {
  return native(sig({{"arg1", "Number"}, {"arg2", "Number"}}, "Boolean"),
                [op](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                  return Value::boolean(op(a[0].as_number(), a[1].as_number()));
                });
}

using BoolOp = bool (*)(bool, bool);
NativeBuiltin logical(BoolOp op) {
  return native(sig({{"arg1", "Boolean"}, {"arg2", "Boolean"}}, "Boolean"),
                [op](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                  return Value::boolean(op(a[0].as_boolean(), a[1].as_boolean()));
                });
}

template <class F>
NativeBuiltin pair_geometry(const char* result, F f) {
  return native(sig({{"arg1", "ValueDomain"}, {"arg2", "ValueDomain"}}, result),
                [f](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                  return with_world(ctx, [&](const World& w) { return f(w, a[0], a[1]); });
                });
}

Hierarchy& writable(EvalContext& ctx) {
  if (!ctx.writable) throw EvalError("read-only", "hook requires a writable graph");
  return *ctx.writable;
}

Value resolve_or_unknown(const Hierarchy& g, const std::string& instance, const std::string& prop) {
  if (!g.has_instance(instance)) return Value::unknown();
  return g.resolve_property(instance, prop);
}

std::vector<Value> items_of(const Value& v) {
  return v.is(Value::Kind::Sequence) ? v.as_sequence().items : std::vector<Value>{};
}

bool contains_value(const std::vector<Value>& items, const Value& v) {
  return std::find(items.begin(), items.end(), v) != items.end();
}

// Agent.grippers changed: point each added gripper at the agent, release removed ones.
std::optional<Value> sync_gripper_owner(const Args& a, EvalContext& ctx, const FunctionLibrary&) {
  Hierarchy& g = writable(ctx);
  const Value agent = a[0];
  const auto old_items = items_of(a[1]);
  const auto new_items = items_of(a[2]);
  for (const auto& gripper : multiset_minus(new_items, old_items)) {
    if (!gripper.is(Value::Kind::EntityRef) || !g.has_instance(gripper.as_entity())) continue;
    if (resolve_or_unknown(g, gripper.as_entity(), "belongingAgent") == agent) continue;
    g.set_property(gripper.as_entity(), "belongingAgent", agent, ctx.hooks, ctx.guard);
  }
  for (const auto& gripper : multiset_minus(old_items, new_items)) {
    if (!gripper.is(Value::Kind::EntityRef) || !g.has_instance(gripper.as_entity())) continue;
    if (!(resolve_or_unknown(g, gripper.as_entity(), "belongingAgent") == agent)) continue;
    g.set_property(gripper.as_entity(), "belongingAgent", Value::unknown(), ctx.hooks, ctx.guard);
  }
  return std::nullopt;
}

// Gripper.belongingAgent changed: move the gripper between agents' grippers lists.
std::optional<Value> sync_agent_grippers(const Args& a, EvalContext& ctx, const FunctionLibrary&) {
  Hierarchy& g = writable(ctx);
  const Value gripper = a[0];
  const Value& old_agent = a[1];
  const Value& new_agent = a[2];
  if (old_agent == new_agent) return std::nullopt;
  if (old_agent.is(Value::Kind::EntityRef) && g.has_instance(old_agent.as_entity())) {
    const Value list = resolve_or_unknown(g, old_agent.as_entity(), "grippers");
    auto items = items_of(list);
    if (contains_value(items, gripper)) {
      items.erase(std::find(items.begin(), items.end(), gripper));
      g.set_property(old_agent.as_entity(), "grippers", Value::sequence(list.as_sequence().element_domain, items),
                     ctx.hooks, ctx.guard);
    }
  }
  if (new_agent.is(Value::Kind::EntityRef) && g.has_instance(new_agent.as_entity())) {
    const Value list = resolve_or_unknown(g, new_agent.as_entity(), "grippers");
    auto items = items_of(list);
    if (!contains_value(items, gripper)) {
      std::string element = "ValueDomain";
      if (list.is(Value::Kind::Sequence))
        element = list.as_sequence().element_domain;
      else if (auto d = g.declared_domain(new_agent.as_entity(), "grippers"); d && d->kind() == Domain::Kind::Sequence)
        element = d->element().to_string();
      items.push_back(gripper);
      g.set_property(new_agent.as_entity(), "grippers", Value::sequence(element, items), ctx.hooks, ctx.guard);
    }
  }
  return std::nullopt;
}

}  // namespace

std::map<std::string, NativeBuiltin> standard_builtins() {
  std::map<std::string, NativeBuiltin> b;
  // Assign and Condition are special forms in the evaluator; these entries only
  // carry their interfaces.
  b["Assign"] = native(sig({{"who", "ValueDomain"}, {"what", "ValueDomain"}}, std::nullopt),
                       [](const Args&, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                         throw EvalError("type-mismatch", "Assign needs a name to write to");
                       },
                       true);
  b["Condition"] = native(
      sig({{"condition", "Boolean"}, {"ifTrue", "Sequence<Function>"}, {"ifFalse", "Sequence<Function>"}},
          std::nullopt),
      [](const Args&, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
        throw EvalError("type-mismatch", "Condition cannot be called with evaluated branches");
      },
      true);

  b["Not"] = native(sig({{"arg", "Boolean"}}, "Boolean"),
                    [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                      return Value::boolean(!a[0].as_boolean());
                    });
  b["And"] = logical([](bool x, bool y) { return x && y; });
  b["Or"] = logical([](bool x, bool y) { return x || y; });
  b["NumberEquals"] = comparison([](double x, double y) { return x == y; });
  b["NumberNotEquals"] = comparison([](double x, double y) { return x != y; });
  b["LessThan"] = comparison([](double x, double y) { return x < y; });
  b["Add"] = arithmetic([](double x, double y) { return x + y; });
  b["Subtract"] = arithmetic([](double x, double y) { return x - y; });
  b["Multiply"] = arithmetic([](double x, double y) { return x * y; });

  b["Equals"] = native(sig({{"arg1", "ValueDomain"}, {"arg2", "ValueDomain"}}, "Boolean"),
                       [](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                         return Value::boolean(with_world(
                             ctx, [&](const World& w) { return values_equivalent(a[0], a[1], &w); }));
                       });
  b["IsKnown"] = native(sig({{"arg", "ValueDomain"}}, "Boolean"),
                        [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                          return Value::boolean(!a[0].is_unknown());
                        },
                        true);

  b["SequenceInsert"] = native(sig({{"sequence", "Sequence<ValueDomain>"}, {"item", "ValueDomain"}},
                                   "Sequence<ValueDomain>"),
                               [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                                 auto s = a[0].as_sequence();
                                 s.items.push_back(a[1]);
                                 return Value::sequence(s.element_domain, std::move(s.items));
                               });
  b["SequenceRemove"] = native(sig({{"sequence", "Sequence<ValueDomain>"}, {"item", "ValueDomain"}},
                                   "Sequence<ValueDomain>"),
                               [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                                 auto s = a[0].as_sequence();
                                 auto it = std::find(s.items.begin(), s.items.end(), a[1]);
                                 if (it != s.items.end()) s.items.erase(it);
                                 return Value::sequence(s.element_domain, std::move(s.items));
                               });
  b["SequenceContains"] = native(sig({{"sequence", "Sequence<ValueDomain>"}, {"item", "ValueDomain"}}, "Boolean"),
                                 [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                                   return Value::boolean(contains_value(a[0].as_sequence().items, a[1]));
                                 });
  b["SequenceFirst"] = native(sig({{"sequence", "Sequence<ValueDomain>"}}, "ValueDomain"),
                              [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                                const auto& items = a[0].as_sequence().items;
                                return items.empty() ? Value::unknown() : items.front();
                              });

  b["IsClose"] = native(sig({{"arg1", "ValueDomain"}, {"arg2", "ValueDomain"}, {"threshold", "Number"}}, "Boolean"),
                        [](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                          return with_world(ctx, [&](const World& w) {
                            return Value::boolean(translation_distance(pose_of(w, a[0]), pose_of(w, a[1])) <=
                                                  a[2].as_number());
                          });
                        });
  b["GlobalDistance"] = pair_geometry("Number", [](const World& w, const Value& x, const Value& y) {
    return Value::number(translation_distance(pose_of(w, x), pose_of(w, y)));
  });
  b["HorizontalDistance"] = pair_geometry("Number", [](const World& w, const Value& x, const Value& y) {
    const Eigen::Vector3d d = pose_of(w, x).translation - pose_of(w, y).translation;
    return Value::number(std::hypot(d.x(), d.y()));
  });
  b["HeightAbove"] = pair_geometry("Number", [](const World& w, const Value& x, const Value& y) {
    return Value::number(pose_of(w, x).translation.z() - pose_of(w, y).translation.z());
  });
  b["InContact"] = pair_geometry("Boolean", [](const World& w, const Value& x, const Value& y) {
    return Value::boolean(w.in_contact(x.as_entity(), y.as_entity()));
  });
  b["IsSupported"] = native(sig({{"arg", "ValueDomain"}}, "Boolean"),
                            [](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                              return with_world(
                                  ctx, [&](const World& w) { return Value::boolean(w.is_supported(a[0].as_entity())); });
                            });
  // Angle in radians between the object's z axis and the world z axis.
  b["Tilt"] = native(sig({{"arg", "ValueDomain"}}, "Number"),
                     [](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                       return with_world(ctx, [&](const World& w) {
                         const Eigen::Vector3d z = pose_of(w, a[0]).rotation * Eigen::Vector3d::UnitZ();
                         return Value::number(std::acos(std::clamp(z.z(), -1.0, 1.0)));
                       });
                     });
  b["CurrentLocation"] = native(sig({{"arg", "ValueDomain"}}, "Location"),
                                [](const Args& a, EvalContext& ctx, const FunctionLibrary&) -> std::optional<Value> {
                                  return with_world(ctx, [&](const World& w) {
                                    auto loc = w.current_location(a[0].as_entity());
                                    if (!loc) throw EvalError("unknown-input", "no location for '" + a[0].as_entity() + "'");
                                    return Value::location(*loc);
                                  });
                                });
  b["LocationAt"] = native(sig({{"arg", "ValueDomain"}}, "Location"),
                           [](const Args& a, EvalContext&, const FunctionLibrary&) -> std::optional<Value> {
                             return Value::location(a[0].as_entity(), Pose::identity());
                           });

  b["SyncGripperOwner"] = native(
      sig({{"instance", "ValueDomain"}, {"oldValue", "ValueDomain"}, {"newValue", "ValueDomain"}}, std::nullopt),
      sync_gripper_owner, true);
  b["SyncAgentGrippers"] = native(
      sig({{"instance", "ValueDomain"}, {"oldValue", "ValueDomain"}, {"newValue", "ValueDomain"}}, std::nullopt),
      sync_agent_grippers, true);
  return b;
}

}  // namespace chkb
