#include "chkb/functions.hpp"

#include <algorithm>

namespace chkb {

namespace {

// Parse failure carrying its diagnostic code and JSON pointer.
class ProcedureError : public DefinitionError {
public:
  ProcedureError(std::string code, std::string pointer, const std::string& message)
      : DefinitionError(message), diag_code(std::move(code)), pointer(std::move(pointer)) {}
  std::string diag_code;
  std::string pointer;
};

const std::set<std::string> kLocationKeys = {"pose", "global", "rel"};

bool is_function_block_domain(const Domain& d) {
  return d.kind() == Domain::Kind::Sequence && d.element().is_entity() &&
         d.element().concept_name() == "Function";
}

std::vector<std::string> split_path(const std::string& s) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const auto dot = s.find('.', start);
    parts.push_back(s.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts;
}

// Natives declare entity parameters as ValueDomain so that any entity concept
// in the hierarchy's declaration is compatible.
bool compatible(const Signature& native, const Signature& declared) {
  if (native.arguments.size() != declared.arguments.size()) return false;
  if (native.result.has_value() != declared.result.has_value()) return false;
  for (size_t i = 0; i < native.arguments.size(); ++i) {
    const Domain& n = native.domains.at(native.arguments[i]);
    const Domain& d = declared.domains.at(declared.arguments[i]);
    if (n.kind() == Domain::Kind::Any) continue;
    if (n.is_entity() && d.is_entity()) continue;
    if (!(n == d)) return false;
  }
  return true;
}

Signature parse_signature(const json& iface, const std::string& pointer) {
  Signature sig;
  if (!iface.is_object() || !iface.contains("arguments") || !iface.at("arguments").is_array())
    throw ProcedureError("CH015", pointer, "interface needs an 'arguments' array");
  for (const auto& a : iface.at("arguments")) {
    if (!a.is_string()) throw ProcedureError("CH015", pointer + "/arguments", "argument names must be strings");
    const auto name = a.get<std::string>();
    if (name == "res") throw ProcedureError("CH015", pointer + "/arguments", "'res' is reserved for the result");
    if (std::find(sig.arguments.begin(), sig.arguments.end(), name) != sig.arguments.end())
      throw ProcedureError("CH015", pointer + "/arguments", "duplicate argument '" + name + "'");
    if (!iface.contains(name) || !iface.at(name).is_string())
      throw ProcedureError("CH015", pointer + "/" + name, "argument '" + name + "' has no domain");
    try {
      sig.domains.emplace(name, Domain::parse(iface.at(name).get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ProcedureError("CH006", pointer + "/" + name, e.what());
    }
    sig.arguments.push_back(name);
  }
  if (iface.contains("res")) {
    if (!iface.at("res").is_string()) throw ProcedureError("CH015", pointer + "/res", "result domain must be a string");
    try {
      sig.result = Domain::parse(iface.at("res").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ProcedureError("CH006", pointer + "/res", e.what());
    }
  }
  return sig;
}

void require_domain_concepts(const Domain& d, const Hierarchy& graph, const std::string& pointer) {
  if (d.kind() == Domain::Kind::Sequence) return require_domain_concepts(d.element(), graph, pointer);
  if (d.is_entity() && !graph.has_concept(d.concept_name()))
    throw ProcedureError("CH006", pointer, "unknown domain '" + d.concept_name() + "'");
}

}  // namespace

struct FunctionLibrary::Frame {
  std::map<std::string, Value> vars;
};

FunctionLibrary::FunctionLibrary() : catalog_(standard_builtins()) {}

const FunctionDef& FunctionLibrary::def(const std::string& name) const {
  auto it = defs_.find(name);
  if (it == defs_.end()) throw LookupError(name);
  return it->second;
}

std::vector<Diagnostic> FunctionLibrary::load(const Hierarchy& graph) {
  defs_.clear();
  bound_.clear();
  std::vector<Diagnostic> diags;
  std::map<std::string, json> procedures;

  for (const auto& [name, node] : graph.concepts()) {
    if (node.kind != ConceptKind::Function) continue;
    const std::string ptr = "/concepts/" + name + "/data";
    if (!node.raw_data.contains("interface")) {
      if (node.raw_data.contains("procedure"))
        diags.push_back({"CH015", name, "procedure without an interface", ptr + "/procedure"});
      if (catalog_.count(name)) defs_[name] = FunctionDef{name, catalog_.at(name).signature, std::nullopt, ""};
      continue;
    }
    try {
      Signature sig = parse_signature(node.raw_data.at("interface"), ptr + "/interface");
      for (const auto& [arg, dom] : sig.domains) require_domain_concepts(dom, graph, ptr + "/interface/" + arg);
      if (sig.result) require_domain_concepts(*sig.result, graph, ptr + "/interface/res");
      defs_[name] = FunctionDef{name, std::move(sig), std::nullopt, ""};
      if (node.raw_data.contains("procedure")) procedures[name] = node.raw_data.at("procedure");
    } catch (const ProcedureError& e) {
      diags.push_back({e.diag_code, name, e.what(), e.pointer});
    }
  }
  for (const auto& [name, native] : catalog_)
    if (!defs_.count(name) && !graph.has_concept(name))
      defs_[name] = FunctionDef{name, native.signature, std::nullopt, ""};

  for (auto& [name, def] : defs_) {
    auto proc = procedures.find(name);
    if (proc != procedures.end()) {
      try {
        def.procedure = parse_procedure(proc->second, def.signature, graph);
      } catch (const ProcedureError& e) {
        diags.push_back({e.diag_code, name, e.what(),
                         "/concepts/" + name + "/data/procedure" + e.pointer});
      }
      continue;
    }
    auto native = catalog_.find(name);
    if (native == catalog_.end()) continue;  // loads; evaluation reports no-definition
    if (!compatible(native->second.signature, def.signature)) {
      diags.push_back({"CH016", name, "declared interface does not match the native builtin",
                       "/concepts/" + name + "/data/interface"});
      continue;
    }
    bound_[name] = native->second;
  }
  check_call_cycles(diags);
  return diags;
}

void FunctionLibrary::add_synthesized(const std::string& name, Signature signature, const json& procedure,
                                      const std::string& owner, const Hierarchy& graph) {
  if (defs_.count(name)) throw DefinitionError("function '" + name + "' already defined");
  ProcNode parsed;
  try {
    parsed = parse_procedure(procedure, signature, graph);
  } catch (const ProcedureError& e) {
    throw DefinitionError(std::string(e.what()) + " at " + (e.pointer.empty() ? "/" : e.pointer));
  }
  defs_[name] = FunctionDef{name, std::move(signature), std::move(parsed), owner};
}

void FunctionLibrary::register_builtin(const std::string& name, Signature signature, NativeFn fn,
                                       bool accepts_unknown) {
  if (bound_.count(name)) throw DefinitionError("builtin '" + name + "' is already registered");
  auto it = defs_.find(name);
  if (it != defs_.end()) {
    if (it->second.procedure)
      throw DefinitionError("builtin '" + name + "' conflicts with a procedure definition");
    if (!compatible(signature, it->second.signature))
      throw DefinitionError("builtin '" + name + "' signature differs from its declaration");
  } else {
    defs_[name] = FunctionDef{name, signature, std::nullopt, ""};
  }
  NativeBuiltin b{std::move(signature), std::move(fn), accepts_unknown};
  catalog_[name] = b;
  bound_[name] = std::move(b);
}

void FunctionLibrary::check_call_cycles(std::vector<Diagnostic>& diags) const {
  std::map<std::string, std::set<std::string>> edges;
  for (const auto& [name, def] : defs_)
    if (def.procedure)
      for_each_call(*def.procedure, [&](const ProcCall& c) { edges[name].insert(c.function); });
  // 0 unvisited, 1 on stack, 2 done
  std::map<std::string, int> state;
  std::vector<std::string> stack;
  std::set<std::string> reported;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    state[n] = 1;
    stack.push_back(n);
    for (const auto& m : edges[n]) {
      if (state[m] == 1) {
        auto from = std::find(stack.begin(), stack.end(), m);
        std::string cyc;
        for (auto it = from; it != stack.end(); ++it) cyc += *it + " -> ";
        cyc += m;
        if (reported.insert(m).second)
          diags.push_back({"CH013", m, "recursive call chain: " + cyc, "/concepts/" + m + "/data/procedure"});
      } else if (state[m] == 0) {
        visit(m);
      }
    }
    stack.pop_back();
    state[n] = 2;
  };
  for (const auto& [name, e] : edges)
    if (state[name] == 0) visit(name);
}

ProcNode FunctionLibrary::parse_procedure(const json& doc, const Signature& owner, const Hierarchy& graph) const {
  if (doc.is_array()) {
    std::vector<ProcNode> statements;
    for (size_t i = 0; i < doc.size(); ++i)
      statements.push_back(parse_node(doc[i], Domain::any(), owner, graph, "/" + std::to_string(i)));
    return ProcNode::make_block(std::move(statements));
  }
  return parse_node(doc, owner.result.value_or(Domain::any()), owner, graph, "");
}

ProcNode FunctionLibrary::parse_node(const json& doc, const Domain& expected, const Signature& owner,
                                     const Hierarchy& graph, const std::string& pointer) const {
  auto fail = [&](const std::string& msg) -> ProcNode { throw ProcedureError("CH015", pointer, msg); };

  if (doc.is_object() && doc.size() == 1 && !kLocationKeys.count(doc.begin().key())) {
    const std::string fn = doc.begin().key();
    auto callee = defs_.find(fn);
    if (callee == defs_.end()) throw ProcedureError("CH012", pointer, "unknown function '" + fn + "'");
    const json& args = doc.begin().value();
    if (!args.is_object()) return fail("arguments of '" + fn + "' must be an object");
    const Signature& sig = callee->second.signature;
    for (const auto& [key, _] : args.items())
      if (!sig.domains.count(key)) return fail("'" + fn + "' has no argument '" + key + "'");
    std::vector<std::pair<std::string, ProcNode>> parsed;
    for (const auto& arg : sig.arguments) {
      const std::string ptr = pointer + "/" + fn + "/" + arg;
      if (!args.contains(arg)) throw ProcedureError("CH015", ptr, "missing argument '" + arg + "' of '" + fn + "'");
      const json& a = args.at(arg);
      const Domain& dom = sig.domains.at(arg);
      if (fn == "Assign" && arg == sig.arguments.front()) {
        if (!a.is_string()) throw ProcedureError("CH015", ptr, "Assign target must be a name");
        ProcNode target = parse_node(a, Domain::any(), owner, graph, ptr);
        if (!target.is_ref()) throw ProcedureError("CH015", ptr, "Assign target '" + a.get<std::string>() + "' is not bound");
        parsed.emplace_back(arg, std::move(target));
      } else if (is_function_block_domain(dom)) {
        std::vector<ProcNode> statements;
        if (a.is_array()) {
          for (size_t i = 0; i < a.size(); ++i)
            statements.push_back(parse_node(a[i], Domain::any(), owner, graph, ptr + "/" + std::to_string(i)));
        } else {
          statements.push_back(parse_node(a, Domain::any(), owner, graph, ptr));
        }
        parsed.emplace_back(arg, ProcNode::make_block(std::move(statements)));
      } else {
        parsed.emplace_back(arg, parse_node(a, dom, owner, graph, ptr));
      }
    }
    return ProcNode::make_call(fn, std::move(parsed));
  }

  if (doc.is_string()) {
    const auto s = doc.get<std::string>();
    if (s == "res" && owner.result) return ProcNode::make_ref("res");
    auto parts = split_path(s);
    if (std::find(owner.arguments.begin(), owner.arguments.end(), parts.front()) != owner.arguments.end()) {
      for (const auto& p : parts)
        if (p.empty()) return fail("malformed reference '" + s + "'");
      std::string head = parts.front();
      parts.erase(parts.begin());
      return ProcNode::make_ref(std::move(head), std::move(parts));
    }
    switch (expected.kind()) {
      case Domain::Kind::Text: return ProcNode::make_literal(Value::text(s));
      case Domain::Kind::Date:
        try {
          return ProcNode::make_literal(Value::date(Date::parse(s)));
        } catch (const std::invalid_argument& e) {
          return fail(e.what());
        }
      case Domain::Kind::Concept: {
        Value v = Value::entity(s);
        if (!graph.contains(s)) return fail("'" + s + "' is neither a bound name nor a known entity");
        if (!graph.has_concept(expected.concept_name()) || !typecheck_value(v, expected, graph))
          return fail("'" + s + "' does not fit " + expected.to_string());
        return ProcNode::make_literal(v);
      }
      case Domain::Kind::Any:
        return ProcNode::make_literal(graph.contains(s) ? Value::entity(s) : Value::text(s));
      default: return fail("'" + s + "' is not a bound name and not a " + expected.to_string() + " literal");
    }
  }

  try {
    Value v = value_from_json(doc, expected.is_entity() ? Domain::any() : expected, &graph);
    return ProcNode::make_literal(std::move(v));
  } catch (const TypeMismatch& e) {
    return fail(e.what());
  }
}

std::vector<ProcRef> FunctionLibrary::assign_targets(const ProcNode& node) {
  std::vector<ProcRef> out;
  for_each_call(node, [&](const ProcCall& c) {
    if (c.function == "Assign" && !c.args.empty() && c.args.front().second.is_ref() &&
        !c.args.front().second.ref().path.empty())
      out.push_back(c.args.front().second.ref());
  });
  return out;
}

std::optional<Value> FunctionLibrary::evaluate(const std::string& name,
                                               const std::map<std::string, Value>& bindings,
                                               EvalContext& ctx) const {
  const FunctionDef& d = def(name);
  std::vector<Value> args;
  for (const auto& a : d.signature.arguments) {
    auto it = bindings.find(a);
    if (it == bindings.end()) throw EvalError("unbound-argument", "argument '" + a + "' of '" + name + "' is unbound");
    args.push_back(it->second);
  }
  return call(name, std::move(args), ctx);
}

std::optional<Value> FunctionLibrary::evaluate_positional(const std::string& name, const std::vector<Value>& args,
                                                          EvalContext& ctx) const {
  return call(name, args, ctx);
}

std::optional<Value> FunctionLibrary::call(const std::string& name, std::vector<Value> args, EvalContext& ctx) const {
  if (!ctx.graph) throw std::logic_error("EvalContext without a graph");
  auto it = defs_.find(name);
  if (it == defs_.end()) throw EvalError("no-definition", "unknown function '" + name + "'");
  const FunctionDef& d = it->second;
  const Signature& sig = d.signature;
  if (args.size() != sig.arguments.size())
    throw EvalError("type-mismatch", "'" + name + "' expects " + std::to_string(sig.arguments.size()) +
                                         " arguments, got " + std::to_string(args.size()));
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i].is_unknown()) continue;
    const Domain& dom = sig.domains.at(sig.arguments[i]);
    bool ok = false;
    try {
      ok = typecheck_value(args[i], dom, *ctx.graph);
    } catch (const LookupError& e) {
      throw EvalError("type-mismatch", e.what());
    }
    if (!ok)
      throw EvalError("type-mismatch", "argument '" + sig.arguments[i] + "' of '" + name + "': " +
                                           args[i].to_string() + " is not a " + dom.to_string());
  }

  std::optional<Value> result;
  if (auto native = bound_.find(name); native != bound_.end()) {
    if (!native->second.accepts_unknown)
      for (size_t i = 0; i < args.size(); ++i)
        if (args[i].is_unknown())
          throw EvalError("unknown-input", "'" + name + "' received UNKNOWN for '" + sig.arguments[i] + "'");
    try {
      result = native->second.fn(args, ctx, *this);
    } catch (const TypeMismatch& e) {
      throw EvalError("type-mismatch", "'" + name + "': " + e.what());
    }
  } else if (d.procedure) {
    Frame frame;
    for (size_t i = 0; i < args.size(); ++i) frame.vars[sig.arguments[i]] = args[i];
    auto last = eval(*d.procedure, frame, ctx);
    if (sig.result) {
      if (auto res = frame.vars.find("res"); res != frame.vars.end())
        result = res->second;
      else if (last)
        result = last;
      else
        throw EvalError("no-definition", "'" + name + "' produced no result");
    }
  } else {
    throw EvalError("no-definition", "'" + name + "' has neither a procedure nor a builtin");
  }

  if (!sig.result) return std::nullopt;
  if (!result) throw EvalError("type-mismatch", "'" + name + "' returned nothing");
  if (!result->is_unknown() && !typecheck_value(*result, *sig.result, *ctx.graph))
    throw EvalError("type-mismatch", "'" + name + "' returned " + result->to_string() + ", not a " +
                                         sig.result->to_string());
  return result;
}

std::optional<Value> FunctionLibrary::eval(const ProcNode& node, Frame& frame, EvalContext& ctx) const {
  if (node.is_ref()) return read_ref(node.ref(), frame, ctx);
  if (node.is_literal()) return node.literal().value;
  if (node.is_block()) {
    std::optional<Value> last;
    for (const auto& s : node.block().statements) last = eval(s, frame, ctx);
    return last;
  }
  const ProcCall& c = node.call();
  if (c.function == "Assign") {
    auto what = eval(c.args.at(1).second, frame, ctx);
    if (!what) throw EvalError("type-mismatch", "Assign of a call that returns nothing");
    assign(c.args.at(0).second.ref(), std::move(*what), frame, ctx);
    return std::nullopt;
  }
  if (c.function == "Condition") {
    auto cond = eval(c.args.at(0).second, frame, ctx);
    if (!cond || cond->is_unknown()) throw EvalError("unknown-input", "Condition on UNKNOWN");
    if (!cond->is(Value::Kind::Boolean))
      throw EvalError("type-mismatch", "Condition expects a Boolean, got " + cond->to_string());
    return eval(c.args.at(cond->as_boolean() ? 1 : 2).second, frame, ctx);
  }
  std::vector<Value> args;
  args.reserve(c.args.size());
  for (const auto& [name, child] : c.args) {
    auto v = eval(child, frame, ctx);
    if (!v) throw EvalError("type-mismatch", "argument '" + name + "' of '" + c.function + "' has no value");
    args.push_back(std::move(*v));
  }
  return call(c.function, std::move(args), ctx);
}

Value FunctionLibrary::read_ref(const ProcRef& ref, const Frame& frame, const EvalContext& ctx) const {
  auto it = frame.vars.find(ref.name);
  if (it == frame.vars.end()) throw EvalError("unbound-argument", "'" + ref.name + "' is unbound");
  Value cur = it->second;
  for (const auto& prop : ref.path) {
    if (cur.is_unknown()) throw EvalError("unknown-input", "'" + ref.to_string() + "' passes through UNKNOWN");
    if (!cur.is(Value::Kind::EntityRef))
      throw EvalError("type-mismatch", "'" + ref.to_string() + "': " + cur.to_string() + " has no properties");
    try {
      const auto& entity = cur.as_entity();
      cur = ctx.graph->has_instance(entity) ? ctx.graph->resolve_property(entity, prop)
                                            : ctx.graph->resolve_detailed(entity, prop).value;
    } catch (const Error& e) {
      throw EvalError("domain", "'" + ref.to_string() + "': " + e.what());
    }
  }
  return cur;
}

void FunctionLibrary::assign(const ProcRef& target, Value value, Frame& frame, EvalContext& ctx) const {
  if (target.path.empty()) {
    frame.vars[target.name] = std::move(value);
    return;
  }
  if (!ctx.writable) throw EvalError("read-only", "cannot assign '" + target.to_string() + "' in a read-only evaluation");
  ProcRef owner{target.name, {target.path.begin(), target.path.end() - 1}};
  const Value entity = read_ref(owner, frame, ctx);
  if (!entity.is(Value::Kind::EntityRef) || !ctx.writable->has_instance(entity.as_entity()))
    throw EvalError("type-mismatch", "'" + owner.to_string() + "' is not an instance");
  LibraryHookRunner fallback(*this, *ctx.writable, ctx.world);
  try {
    ctx.writable->set_property(entity.as_entity(), target.path.back(), std::move(value),
                               ctx.hooks ? ctx.hooks : &fallback, ctx.guard);
  } catch (const TypeMismatch& e) {
    throw EvalError("type-mismatch", e.what());
  } catch (const DeclarationError& e) {
    throw EvalError("domain", e.what());
  }
}

void LibraryHookRunner::run_hook(const std::string& function, const std::string& instance, const std::string&,
                                 const Value& old_value, const Value& new_value, HookGuard& guard) {
  EvalContext ctx{&graph_, &graph_, world_, this, &guard};
  lib_.evaluate_positional(function, {Value::entity(instance), old_value, new_value}, ctx);
}

bool values_equivalent(const Value& a, const Value& b, const World* world) {
  if (a.is(Value::Kind::Location) && b.is(Value::Kind::Location) && world) {
    auto ga = globalize(*world, a.as_location());
    auto gb = globalize(*world, b.as_location());
    if (ga && gb) return near(*ga, *gb, 0.01, 5.0 * M_PI / 180.0);
  }
  if (a.is(Value::Kind::Sequence) && b.is(Value::Kind::Sequence))
    return multiset_equal(a.as_sequence().items, b.as_sequence().items);
  return a == b;
}

}  // namespace chkb
