#include "chkb/procedure.hpp"

namespace chkb {

std::string ProcRef::to_string() const {
  std::string s = name;
  for (const auto& p : path) s += "." + p;
  return s;
}

json procedure_to_json(const ProcNode& node) {
  if (node.is_ref()) return node.ref().to_string();
  if (node.is_literal()) return value_to_json(node.literal().value);
  if (node.is_block()) {
    json arr = json::array();
    for (const auto& s : node.block().statements) arr.push_back(procedure_to_json(s));
    return arr;
  }
  json args = json::object();
  for (const auto& [name, child] : node.call().args) args[name] = procedure_to_json(child);
  return json{{node.call().function, args}};
}

void for_each_call(const ProcNode& node, const std::function<void(const ProcCall&)>& fn) {
  if (node.is_call()) {
    fn(node.call());
    for (const auto& [name, child] : node.call().args) for_each_call(child, fn);
  } else if (node.is_block()) {
    for (const auto& s : node.block().statements) for_each_call(s, fn);
  }
}

size_t count_calls(const ProcNode& node) {
  size_t n = 0;
  for_each_call(node, [&](const ProcCall&) { ++n; });
  return n;
}

}  // namespace chkb
