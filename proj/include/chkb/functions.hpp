#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chkb/domain.hpp"
#include "chkb/hierarchy.hpp"
#include "chkb/procedure.hpp"
#include "chkb/world.hpp"

namespace chkb {

// Everything an evaluation may touch. `writable`, when set, must alias `graph`;
// without it Assign to a property path fails with "read-only".
struct EvalContext {
  const Hierarchy* graph = nullptr;
  Hierarchy* writable = nullptr;
  const World* world = nullptr;
  HookRunner* hooks = nullptr;
  HookGuard* guard = nullptr;
};

struct Signature {
  std::vector<std::string> arguments;
  std::map<std::string, Domain> domains;
  std::optional<Domain> result;

  bool operator==(const Signature& rhs) const {
    return arguments == rhs.arguments && domains == rhs.domains && result == rhs.result;
  }
};

struct FunctionDef {
  std::string name;
  Signature signature;
  std::optional<ProcNode> procedure;
  std::string owner;  // set for skill stages defined inline: the owning skill
};

class FunctionLibrary;

// Native implementation. Receives arguments in declared order; returns nullopt for unit.
using NativeFn = std::function<std::optional<Value>(const std::vector<Value>& args, EvalContext& ctx,
                                                    const FunctionLibrary& lib)>;

struct NativeBuiltin {
  Signature signature;
  NativeFn fn;
  bool accepts_unknown = false;  // otherwise UNKNOWN arguments raise "unknown-input"
};

// Function definitions read from a hierarchy, bound to native builtins or to
// parsed procedures, plus the evaluator.
class FunctionLibrary {
public:
  // Starts with the shipped builtin catalog.
  FunctionLibrary();

  // Rebuilds all definitions from the Function concepts of `graph` (whose index
  // must be current). Returns diagnostics; errors leave the library unusable.
  std::vector<Diagnostic> load(const Hierarchy& graph);

  // Adds a synthesized definition (inline skill stages). Parses `procedure`
  // against the current library. Throws DefinitionError.
  void add_synthesized(const std::string& name, Signature signature, const json& procedure,
                       const std::string& owner, const Hierarchy& graph);

  // Binds a native implementation. Throws DefinitionError for a duplicate name,
  // a definition with a procedure, or a signature that differs from the loaded one.
  void register_builtin(const std::string& name, Signature signature, NativeFn fn,
                        bool accepts_unknown = false);

  bool has(const std::string& name) const { return defs_.count(name) > 0; }
  const FunctionDef& def(const std::string& name) const;
  const std::map<std::string, FunctionDef>& defs() const { return defs_; }
  bool is_native(const std::string& name) const { return bound_.count(name) > 0; }
  const std::map<std::string, NativeBuiltin>& catalog() const { return catalog_; }

  // Evaluates with named bindings (missing names raise "unbound-argument").
  std::optional<Value> evaluate(const std::string& name, const std::map<std::string, Value>& bindings,
                                EvalContext& ctx) const;
  std::optional<Value> evaluate_positional(const std::string& name, const std::vector<Value>& args,
                                           EvalContext& ctx) const;

  // Parses a procedure document for a function with the given signature.
  // Throws DefinitionError naming the offending JSON pointer.
  ProcNode parse_procedure(const json& doc, const Signature& owner, const Hierarchy& graph) const;

  // Statically collected Assign targets with a property path: (name, path).
  static std::vector<ProcRef> assign_targets(const ProcNode& node);

private:
  struct Frame;
  std::optional<Value> call(const std::string& name, std::vector<Value> args, EvalContext& ctx) const;
  std::optional<Value> eval(const ProcNode& node, Frame& frame, EvalContext& ctx) const;
  Value read_ref(const ProcRef& ref, const Frame& frame, const EvalContext& ctx) const;
  void assign(const ProcRef& target, Value value, Frame& frame, EvalContext& ctx) const;
  ProcNode parse_node(const json& doc, const Domain& expected, const Signature& owner,
                      const Hierarchy& graph, const std::string& pointer) const;
  void check_call_cycles(std::vector<Diagnostic>& diags) const;

  std::map<std::string, NativeBuiltin> catalog_;  // available natives
  std::map<std::string, NativeBuiltin> bound_;    // natives actually dispatched
  std::map<std::string, FunctionDef> defs_;
};

// Runs hook functions through a library against a writable graph. A hook is
// called with (instance, old value, new value) bound positionally.
class LibraryHookRunner : public HookRunner {
public:
  LibraryHookRunner(const FunctionLibrary& lib, Hierarchy& graph, const World* world = nullptr)
      : lib_(lib), graph_(graph), world_(world) {}
  void run_hook(const std::string& function, const std::string& instance, const std::string& property,
                const Value& old_value, const Value& new_value, HookGuard& guard) override;

private:
  const FunctionLibrary& lib_;
  Hierarchy& graph_;
  const World* world_;
};

// The shipped native catalog.
std::map<std::string, NativeBuiltin> standard_builtins();

// Equality with Locations compared in the origin frame (1 cm, 5 degrees) when a
// world is available, structural otherwise. Sequences compare as multisets.
bool values_equivalent(const Value& a, const Value& b, const World* world);

}  // namespace chkb
