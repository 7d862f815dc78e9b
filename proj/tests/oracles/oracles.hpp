#pragma once

// Reference implementations used to check the library. They work on plain
// standard containers and raw JSON, sharing no code with the code under test.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace oracle {

using json = nlohmann::json;
using Parents = std::map<std::string, std::vector<std::string>>;

// Reflexive transitive closure by depth-first search.
inline std::set<std::string> dfs_ancestors(const Parents& parents, const std::string& start) {
  std::set<std::string> seen;
  std::vector<std::string> stack{start};
  while (!stack.empty()) {
    std::string n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    auto it = parents.find(n);
    if (it == parents.end()) continue;
    for (const auto& p : it->second) stack.push_back(p);
  }
  return seen;
}

inline bool below(const Parents& parents, const std::string& child, const std::string& ancestor) {
  return dfs_ancestors(parents, child).count(ancestor) > 0;
}

// Shortest edge distance from `start` to every ancestor, by breadth-first search.
inline std::map<std::string, int> bfs_distances(const Parents& parents, const std::string& start) {
  std::map<std::string, int> dist{{start, 0}};
  std::deque<std::string> queue{start};
  while (!queue.empty()) {
    std::string n = queue.front();
    queue.pop_front();
    auto it = parents.find(n);
    if (it == parents.end()) continue;
    for (const auto& p : it->second)
      if (!dist.count(p)) {
        dist[p] = dist[n] + 1;
        queue.push_back(p);
      }
  }
  return dist;
}

struct Resolution {
  enum Kind { Value, Unknown, Ambiguous } kind = Unknown;
  int value = 0;
  int distance = -1;
};

// Specificity: own value, else the defaults at minimal BFS distance; distinct
// values there are ambiguous.
inline Resolution bfs_default(const Parents& parents, const std::map<std::string, int>& defaults,
                              const std::string& instance, std::optional<int> own) {
  if (own) return {Resolution::Value, *own, 0};
  int best = -1;
  std::set<int> values;
  for (const auto& [node, d] : bfs_distances(parents, instance)) {
    auto def = defaults.find(node);
    if (def == defaults.end()) continue;
    if (best == -1 || d < best) {
      best = d;
      values = {def->second};
    } else if (d == best) {
      values.insert(def->second);
    }
  }
  if (best == -1) return {};
  if (values.size() > 1) return {Resolution::Ambiguous, 0, best};
  return {Resolution::Value, *values.begin(), best};
}

// Concepts above every instance with no proper descendant also above every instance.
inline std::set<std::string> specialized_common(const Parents& parents, const std::vector<std::string>& instances,
                                                const std::set<std::string>& concepts) {
  std::set<std::string> common;
  for (const auto& c : concepts) {
    bool all = std::all_of(instances.begin(), instances.end(),
                           [&](const std::string& i) { return below(parents, i, c); });
    if (all) common.insert(c);
  }
  std::set<std::string> out;
  for (const auto& c : common) {
    bool has_lower = std::any_of(common.begin(), common.end(),
                                 [&](const std::string& d) { return d != c && below(parents, d, c); });
    if (!has_lower) out.insert(c);
  }
  return out;
}

struct ParamSpec {
  std::string name;
  std::vector<std::string> required;
  std::vector<std::string> restricted;
};

struct DefSpec {
  std::string name;
  std::vector<ParamSpec> params;  // agents and entities
};

inline bool matches(const Parents& parents, const std::string& entity, const ParamSpec& p) {
  for (const auto& c : p.required)
    if (!below(parents, entity, c)) return false;
  for (const auto& c : p.restricted)
    if (below(parents, entity, c)) return false;
  return true;
}

// Every (definition, p1..pn) over all n-tuples of parameter names, kept when
// entity i fits pi and the names are pairwise distinct.
inline std::set<std::pair<std::string, std::vector<std::string>>> brute_merge(const Parents& parents,
                                                                              const std::vector<DefSpec>& defs,
                                                                              const std::vector<std::string>& entities) {
  std::set<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& d : defs) {
    const size_t k = d.params.size();
    if (k == 0) continue;
    std::vector<size_t> idx(entities.size(), 0);
    while (true) {
      std::set<std::string> names;
      bool ok = true;
      std::vector<std::string> tuple;
      for (size_t i = 0; i < entities.size(); ++i) {
        const auto& p = d.params[idx[i]];
        tuple.push_back(p.name);
        names.insert(p.name);
        ok = ok && matches(parents, entities[i], p);
      }
      if (ok && names.size() == entities.size()) out.emplace(d.name, tuple);
      size_t pos = 0;
      while (pos < idx.size() && ++idx[pos] == k) idx[pos++] = 0;
      if (pos == idx.size()) break;
    }
  }
  return out;
}

// n! / (n - r)!, zero when r > n.
inline size_t permutations(size_t n, size_t r) {
  if (r > n) return 0;
  size_t out = 1;
  for (size_t i = 0; i < r; ++i) out *= n - i;
  return out;
}

// Typecheck truth table over primitive value tags and primitive domains.
inline bool primitive_accepts(const std::string& value_tag, const std::string& domain) {
  static const std::map<std::string, std::set<std::string>> table = {
      {"ValueDomain", {"Number", "Boolean", "Text", "Date", "Sequence", "Location", "EntityRef"}},
      {"Number", {"Number"}},
      {"Boolean", {"Boolean"}},
      {"String", {"Text"}},
      {"Date", {"Date"}},
      {"Location", {"Location"}},
  };
  auto it = table.find(domain);
  if (it == table.end()) throw std::invalid_argument("not a primitive domain: " + domain);
  return it->second.count(value_tag) > 0;
}

// Recursive evaluator for procedure documents over the arithmetic, comparison
// and logic builtins, with Assign to "res" and Condition.
class MiniInterpreter {
public:
  struct Val {
    bool is_bool = false;
    double num = 0.0;
    bool b = false;
    bool operator==(const Val&) const = default;
  };
  std::map<std::string, Val> vars;

  Val expr(const json& doc) {
    if (doc.is_boolean()) return {true, 0.0, doc.get<bool>()};
    if (doc.is_number()) return {false, doc.get<double>(), false};
    if (doc.is_string()) {
      auto it = vars.find(doc.get<std::string>());
      if (it == vars.end()) throw std::runtime_error("unbound " + doc.get<std::string>());
      return it->second;
    }
    const std::string fn = doc.begin().key();
    const json& a = doc.begin().value();
    auto num = [&](const char* k) {
      Val v = expr(a.at(k));
      if (v.is_bool) throw std::runtime_error("type");
      return v.num;
    };
    auto boolean = [&](const char* k) {
      Val v = expr(a.at(k));
      if (!v.is_bool) throw std::runtime_error("type");
      return v.b;
    };
    auto B = [](bool x) { return Val{true, 0.0, x}; };
    auto N = [](double x) { return Val{false, x, false}; };
    if (fn == "Not") return B(!boolean("arg"));
    if (fn == "And") {
      bool x = boolean("arg1"), y = boolean("arg2");
      return B(x && y);
    }
    if (fn == "Or") {
      bool x = boolean("arg1"), y = boolean("arg2");
      return B(x || y);
    }
    if (fn == "NumberEquals") {
      double x = num("arg1"), y = num("arg2");
      return B(x == y);
    }
    if (fn == "NumberNotEquals") {
      double x = num("arg1"), y = num("arg2");
      return B(x != y);
    }
    if (fn == "LessThan") {
      double x = num("arg1"), y = num("arg2");
      return B(x < y);
    }
    if (fn == "Add") {
      double x = num("arg1"), y = num("arg2");
      return N(x + y);
    }
    if (fn == "Subtract") {
      double x = num("arg1"), y = num("arg2");
      return N(x - y);
    }
    if (fn == "Multiply") {
      double x = num("arg1"), y = num("arg2");
      return N(x * y);
    }
    throw std::runtime_error("unsupported " + fn);
  }

  void statement(const json& doc) {
    const std::string fn = doc.begin().key();
    const json& a = doc.begin().value();
    if (fn == "Assign") {
      vars[a.at("who").get<std::string>()] = expr(a.at("what"));
    } else if (fn == "Condition") {
      const json& branch = expr(a.at("condition")).b ? a.at("ifTrue") : a.at("ifFalse");
      for (const auto& s : branch) statement(s);
    } else {
      expr(doc);
    }
  }

  // Runs a procedure (a statement list or a bare expression) and returns "res".
  Val run(const json& procedure) {
    if (!procedure.is_array()) return expr(procedure);
    for (const auto& s : procedure) statement(s);
    return vars.at("res");
  }
};

}  // namespace oracle
