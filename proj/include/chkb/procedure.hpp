#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "chkb/value.hpp"

namespace chkb {

struct ProcNode;

// A bound name, optionally followed by a property path: "arg", "res", "o.location".
struct ProcRef {
  std::string name;
  std::vector<std::string> path;
  bool operator==(const ProcRef&) const = default;
  std::string to_string() const;
};

struct ProcLiteral {
  Value value;
  bool operator==(const ProcLiteral&) const = default;
};

// Arguments are stored in the callee's declared order.
struct ProcCall {
  std::string function;
  std::vector<std::pair<std::string, ProcNode>> args;
  bool operator==(const ProcCall&) const;
};

// Statement sequence: the branch bodies of Condition and top-level procedures.
struct ProcBlock {
  std::vector<ProcNode> statements;
  bool operator==(const ProcBlock&) const;
};

struct ProcNode {
  std::variant<ProcRef, ProcLiteral, ProcCall, ProcBlock> node;

  bool is_ref() const { return std::holds_alternative<ProcRef>(node); }
  bool is_literal() const { return std::holds_alternative<ProcLiteral>(node); }
  bool is_call() const { return std::holds_alternative<ProcCall>(node); }
  bool is_block() const { return std::holds_alternative<ProcBlock>(node); }
  const ProcRef& ref() const { return std::get<ProcRef>(node); }
  const ProcLiteral& literal() const { return std::get<ProcLiteral>(node); }
  const ProcCall& call() const { return std::get<ProcCall>(node); }
  ProcCall& call() { return std::get<ProcCall>(node); }
  const ProcBlock& block() const { return std::get<ProcBlock>(node); }
  ProcBlock& block() { return std::get<ProcBlock>(node); }

  bool operator==(const ProcNode& rhs) const { return node == rhs.node; }

  static ProcNode make_ref(std::string name, std::vector<std::string> path = {}) {
    return ProcNode{ProcRef{std::move(name), std::move(path)}};
  }
  static ProcNode make_literal(Value v) { return ProcNode{ProcLiteral{std::move(v)}}; }
  static ProcNode make_call(std::string fn, std::vector<std::pair<std::string, ProcNode>> args) {
    return ProcNode{ProcCall{std::move(fn), std::move(args)}};
  }
  static ProcNode make_block(std::vector<ProcNode> statements) {
    return ProcNode{ProcBlock{std::move(statements)}};
  }
};

inline bool ProcCall::operator==(const ProcCall& rhs) const {
  return function == rhs.function && args == rhs.args;
}
inline bool ProcBlock::operator==(const ProcBlock& rhs) const { return statements == rhs.statements; }

// Serializes back to the document form: {"Fn": {"arg": ...}}, arrays for blocks,
// strings for references, plain JSON for literals.
json procedure_to_json(const ProcNode& node);

// Number of call nodes in the tree (blocks excluded).
size_t count_calls(const ProcNode& node);

// Visits every call node in pre-order.
void for_each_call(const ProcNode& node, const std::function<void(const ProcCall&)>& fn);

}  // namespace chkb
