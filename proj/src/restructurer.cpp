#include "chkb/restructurer.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>

#include "chkb/io.hpp"

namespace chkb {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(uint64_t v, int digits) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf + 16 - digits);
}

std::string escape_pointer_token(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Name not yet used by a concept, an instance, or a name reserved in this plan.
std::string unique_name(const std::string& base, const Hierarchy& graph, const std::set<std::string>& taken) {
  std::string name = base;
  for (int i = 2; graph.contains(name) || taken.count(name); ++i) name = base + "_" + std::to_string(i);
  return name;
}

// ---- concept extraction ---------------------------------------------------

bool defines_default(const ConceptNode& n, const std::string& prop) { return n.default_values.count(prop) > 0; }

// ---- function extraction --------------------------------------------------

using Path = std::vector<size_t>;

// Canonical text of a node; refs and literals never collide.
std::string node_key(const ProcNode& n) {
  if (n.is_ref()) return "@" + n.ref().to_string();
  if (n.is_literal()) return "=" + value_key(n.literal().value);
  if (n.is_block()) {
    std::string s = "[";
    for (const auto& st : n.block().statements) s += node_key(st) + ",";
    return s + "]";
  }
  std::string s = n.call().function + "(";
  for (const auto& [name, arg] : n.call().args) s += name + ":" + node_key(arg) + ",";
  return s + ")";
}

const ProcNode& node_at(const ProcNode& root, const Path& path) {
  const ProcNode* n = &root;
  for (size_t i : path) n = n->is_block() ? &n->block().statements[i] : &n->call().args[i].second;
  return *n;
}

ProcNode& node_at(ProcNode& root, const Path& path) {
  ProcNode* n = &root;
  for (size_t i : path) n = n->is_block() ? &n->block().statements[i] : &n->call().args[i].second;
  return *n;
}

bool is_prefix(const Path& a, const Path& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

struct Source {
  std::string concept_name;
  std::string pointer;
  ProcNode proc;
  bool generated = false;  // body of a function created by this plan
  bool changed = false;
};

struct Occurrence {
  size_t source;
  Path path;
};

class FunctionExtractor {
public:
  FunctionExtractor(const KnowledgeBase& kb, const RestructureOptions& options) : kb_(kb), options_(options) {}

  RestructurePlan run();

private:
  std::optional<Domain> result_of(const std::string& fn) const {
    auto it = new_sigs_.find(fn);
    if (it != new_sigs_.end()) return it->second.result;
    if (!kb_.functions.has(fn)) return std::nullopt;
    return kb_.functions.def(fn).signature.result;
  }
  const Signature* signature_of(const std::string& fn) const {
    auto it = new_sigs_.find(fn);
    if (it != new_sigs_.end()) return &it->second;
    return kb_.functions.has(fn) ? &kb_.functions.def(fn).signature : nullptr;
  }

  // A call subtree that can move into its own function: pure and value-returning.
  bool extractable(const ProcNode& n) const {
    if (!n.is_call()) return n.is_ref() || n.is_literal();
    const auto& c = n.call();
    if (c.function == "Assign" || c.function == "Condition" || !result_of(c.function)) return false;
    return std::all_of(c.args.begin(), c.args.end(), [&](const auto& a) { return extractable(a.second); });
  }

  void collect(size_t src, const ProcNode& n, Path& path, std::vector<Occurrence>& out) const {
    if (n.is_call() && extractable(n) && !(sources_[src].generated && path.empty())) out.push_back({src, path});
    const size_t count = n.is_block() ? n.block().statements.size() : n.is_call() ? n.call().args.size() : 0;
    for (size_t i = 0; i < count; ++i) {
      path.push_back(i);
      collect(src, n.is_block() ? n.block().statements[i] : n.call().args[i].second, path, out);
      path.pop_back();
    }
  }

  const ProcNode& at(const Occurrence& o) const { return node_at(sources_[o.source].proc, o.path); }

  bool overlap(const Occurrence& a, const Occurrence& b) const {
    return a.source == b.source && (is_prefix(a.path, b.path) || is_prefix(b.path, a.path));
  }

  // Least general generalization; holes are refs named argK in first-appearance order.
  ProcNode lgg(const std::vector<const ProcNode*>& nodes, std::map<std::string, std::string>& holes) const {
    const ProcNode& first = *nodes.front();
    if (first.is_call() && std::all_of(nodes.begin(), nodes.end(), [&](const ProcNode* n) {
          return n->is_call() && n->call().function == first.call().function;
        })) {
      std::vector<std::pair<std::string, ProcNode>> args;
      for (size_t i = 0; i < first.call().args.size(); ++i) {
        std::vector<const ProcNode*> column;
        for (const auto* n : nodes) column.push_back(&n->call().args[i].second);
        args.emplace_back(first.call().args[i].first, lgg(column, holes));
      }
      return ProcNode::make_call(first.call().function, std::move(args));
    }
    if (first.is_literal() && std::all_of(nodes.begin(), nodes.end(), [&](const ProcNode* n) {
          return n->is_literal() && n->literal().value == first.literal().value;
        }))
      return first;
    std::string key;
    for (const auto* n : nodes) key += node_key(*n) + "\n";
    auto it = holes.find(key);
    if (it == holes.end()) it = holes.emplace(key, "arg" + std::to_string(holes.size() + 1)).first;
    return ProcNode::make_ref(it->second);
  }

  static bool match(const ProcNode& pattern, const ProcNode& n, std::map<std::string, const ProcNode*>& bound) {
    if (pattern.is_ref()) {
      auto it = bound.find(pattern.ref().name);
      if (it == bound.end()) {
        bound.emplace(pattern.ref().name, &n);
        return true;
      }
      return *it->second == n;
    }
    if (pattern.is_literal()) return n.is_literal() && n.literal().value == pattern.literal().value;
    if (!n.is_call() || n.call().function != pattern.call().function) return false;
    for (size_t i = 0; i < pattern.call().args.size(); ++i)
      if (!match(pattern.call().args[i].second, n.call().args[i].second, bound)) return false;
    return true;
  }

  // Text literals that would read back as references to the new arguments.
  static bool literal_clash(const ProcNode& n, size_t arity) {
    if (n.is_literal()) {
      if (!n.literal().value.is(Value::Kind::Text)) return false;
      const std::string s = n.literal().value.as_text();
      const std::string head = s.substr(0, s.find('.'));
      if (head == "res") return true;
      for (size_t i = 1; i <= arity; ++i)
        if (head == "arg" + std::to_string(i)) return true;
      return false;
    }
    if (!n.is_call()) return false;
    return std::any_of(n.call().args.begin(), n.call().args.end(),
                       [&](const auto& a) { return literal_clash(a.second, arity); });
  }

  void hole_domains(const ProcNode& n, std::map<std::string, Domain>& out) const {
    if (!n.is_call()) return;
    const Signature* sig = signature_of(n.call().function);
    for (const auto& [name, arg] : n.call().args) {
      if (arg.is_ref() && !out.count(arg.ref().name)) out.emplace(arg.ref().name, sig->domains.at(name));
      hole_domains(arg, out);
    }
  }

  struct Candidate {
    ProcNode pattern;
    size_t arity = 0;
    std::vector<size_t> cluster;  // indices into the occurrence list
  };

  std::optional<Candidate> best_candidate(const std::vector<Occurrence>& occ) const;
  void extract(const Candidate& cand, const std::vector<Occurrence>& occ, RestructurePlan& plan);

  const KnowledgeBase& kb_;
  RestructureOptions options_;
  std::vector<Source> sources_;
  std::map<std::string, Signature> new_sigs_;
  std::set<std::string> taken_;
  std::map<std::string, size_t> generated_index_;  // function name -> plan.functions index
};

std::optional<FunctionExtractor::Candidate> FunctionExtractor::best_candidate(const std::vector<Occurrence>& occ) const {
  std::set<std::string> tried;
  std::optional<Candidate> best;
  auto better = [](const Candidate& a, const Candidate& b) {
    const size_t ca = count_calls(a.pattern), cb = count_calls(b.pattern);
    if (ca != cb) return ca > cb;
    if (a.cluster.front() != b.cluster.front()) return a.cluster.front() < b.cluster.front();
    return a.cluster.size() > b.cluster.size();
  };
  for (size_t i = 0; i < occ.size(); ++i) {
    for (size_t j = i + 1; j < occ.size(); ++j) {
      const ProcNode& a = at(occ[i]);
      const ProcNode& b = at(occ[j]);
      if (a.call().function != b.call().function || overlap(occ[i], occ[j])) continue;
      std::map<std::string, std::string> holes;
      ProcNode pair = lgg({&a, &b}, holes);
      if (count_calls(pair) < 2 || !tried.insert(node_key(pair)).second) continue;

      Candidate cand;
      for (size_t k = 0; k < occ.size(); ++k) {
        std::map<std::string, const ProcNode*> bound;
        if (!match(pair, at(occ[k]), bound)) continue;
        if (std::any_of(cand.cluster.begin(), cand.cluster.end(),
                        [&](size_t c) { return overlap(occ[c], occ[k]); }))
          continue;
        cand.cluster.push_back(k);
      }
      if (cand.cluster.size() < options_.min_occurrences) continue;
      std::vector<const ProcNode*> nodes;
      for (size_t k : cand.cluster) nodes.push_back(&at(occ[k]));
      std::map<std::string, std::string> cluster_holes;
      cand.pattern = lgg(nodes, cluster_holes);
      cand.arity = cluster_holes.size();
      if (literal_clash(cand.pattern, cand.arity)) continue;
      if (!best || better(cand, *best)) best = std::move(cand);
    }
  }
  return best;
}

void FunctionExtractor::extract(const Candidate& cand, const std::vector<Occurrence>& occ, RestructurePlan& plan) {
  const std::string name = unique_name("AutoFn_" + hex(fnv1a(node_key(cand.pattern)), 8), kb_.graph, taken_);
  taken_.insert(name);

  Signature sig;
  std::map<std::string, Domain> domains;
  hole_domains(cand.pattern, domains);
  for (size_t i = 1; i <= cand.arity; ++i) {
    const std::string arg = "arg" + std::to_string(i);
    sig.arguments.push_back(arg);
    sig.domains.emplace(arg, domains.at(arg));
  }
  sig.result = result_of(cand.pattern.call().function);
  new_sigs_[name] = sig;

  // Cluster members never nest, so each replacement leaves the other paths valid.
  for (size_t k : cand.cluster) {
    std::map<std::string, const ProcNode*> bound;
    match(cand.pattern, at(occ[k]), bound);
    std::vector<std::pair<std::string, ProcNode>> args;
    for (const auto& arg : sig.arguments) args.emplace_back(arg, *bound.at(arg));
    Source& src = sources_[occ[k].source];
    node_at(src.proc, occ[k].path) = ProcNode::make_call(name, std::move(args));
    src.changed = true;
  }

  Source body{name, "/procedure", cand.pattern, true, true};
  sources_.push_back(std::move(body));
  generated_index_[name] = plan.functions.size();
  plan.functions.push_back({name, {"Function"}, sig, procedure_to_json(cand.pattern), cand.cluster.size()});
}

RestructurePlan FunctionExtractor::run() {
  RestructurePlan plan;
  plan.fingerprint = graph_fingerprint(kb_.graph);
  if (!kb_.graph.has_concept("Function")) return plan;

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [name, def] : kb_.functions.defs()) {
    if (!def.procedure) continue;
    std::string concept_name = name, pointer = "/procedure";
    if (!def.owner.empty()) {
      const std::string rest = name.substr(def.owner.size() + 1);
      std::vector<std::string> hits;
      if (rest.rfind("extract.", 0) == 0) {
        const std::string param = rest.substr(8);
        pointer = "/parameters/" + escape_pointer_token(param) + "/extract";
        hits = kb_.graph.nearest_defining(def.owner, [&](const ConceptNode& n) {
          return n.raw_data.contains("parameters") && n.raw_data.at("parameters").is_object() &&
                 n.raw_data.at("parameters").contains(param) && n.raw_data.at("parameters").at(param).is_object() &&
                 n.raw_data.at("parameters").at(param).contains("extract");
        });
      } else {
        pointer = "/" + escape_pointer_token(rest);
        hits = kb_.graph.nearest_defining(def.owner, [&](const ConceptNode& n) { return n.raw_data.contains(rest); });
      }
      if (hits.empty()) continue;
      concept_name = hits.front();
    }
    if (!seen.insert({concept_name, pointer}).second) continue;
    const bool generated = def.owner.empty() && name.rfind("AutoFn_", 0) == 0;
    sources_.push_back({concept_name, pointer, *def.procedure, generated, false});
  }

  for (size_t round = 0; round < options_.max_rounds; ++round) {
    std::vector<Occurrence> occ;
    for (size_t s = 0; s < sources_.size(); ++s) {
      Path path;
      collect(s, sources_[s].proc, path, occ);
    }
    auto cand = best_candidate(occ);
    if (!cand) break;
    extract(*cand, occ, plan);
    if (round + 1 == options_.max_rounds) plan.notes.push_back("function extraction stopped at the round limit");
  }

  for (const auto& src : sources_) {
    if (!src.changed) continue;
    if (src.generated) {
      plan.functions[generated_index_.at(src.concept_name)].procedure = procedure_to_json(src.proc);
      continue;
    }
    const json& before = kb_.graph.concept_node(src.concept_name).raw_data.at(json::json_pointer(src.pointer));
    plan.rewrites.push_back({src.concept_name, src.pointer, before, procedure_to_json(src.proc)});
  }
  for (const auto& f : plan.functions)
    plan.notes.push_back(f.name + " replaces " + std::to_string(f.occurrences) + " occurrences of " + f.procedure.dump());
  return plan;
}

json signature_to_json(const Signature& sig) {
  json out = {{"arguments", sig.arguments}};
  for (const auto& [name, dom] : sig.domains) out[name] = dom.to_string();
  if (sig.result) out["res"] = sig.result->to_string();
  return out;
}

// Resolved value of every (instance, property) pair, or the error code.
std::map<std::pair<std::string, std::string>, std::string> resolution_table(const Hierarchy& g) {
  std::map<std::pair<std::string, std::string>, std::string> out;
  for (const auto& [name, rec] : g.instances()) {
    for (const auto& [prop, dom] : g.declared_properties(name)) {
      try {
        out[{name, prop}] = value_key(g.resolve_property(name, prop));
      } catch (const Error& e) {
        out[{name, prop}] = "!" + e.code();
      }
    }
  }
  return out;
}

void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

void remove_value(std::vector<std::string>& v, const std::string& s) {
  auto it = std::find(v.begin(), v.end(), s);
  if (it != v.end()) v.erase(it);
}

}  // namespace

std::string graph_fingerprint(const Hierarchy& graph) { return hex(fnv1a(serialize_hierarchy(graph).dump()), 16); }

RestructurePlan extract_concepts(const KnowledgeBase& kb, const RestructureOptions& options) {
  const Hierarchy& g = kb.graph;
  RestructurePlan plan;
  plan.fingerprint = graph_fingerprint(g);

  struct Cluster {
    Value value;
    std::vector<std::string> instances;
  };
  std::map<std::pair<std::string, std::string>, Cluster> clusters;  // (property, value key)
  for (const auto& [name, rec] : g.instances()) {
    for (const auto& [prop, dom] : g.declared_properties(name)) {
      Value v;
      try {
        v = g.resolve_property(name, prop);
      } catch (const Error&) {
        continue;
      }
      // Poses are per-instance state, not shared knowledge.
      if (v.is_unknown() || v.is(Value::Kind::Location)) continue;
      auto& c = clusters[{prop, value_key(v)}];
      c.value = v;
      c.instances.push_back(name);
    }
  }

  std::set<std::string> taken;
  for (const auto& [key, cluster] : clusters) {
    const auto& [prop, vkey] = key;
    if (cluster.instances.size() < options.min_instances) continue;

    std::set<std::string> common = g.ancestors(cluster.instances.front());
    for (const auto& inst : cluster.instances) {
      const auto anc = g.ancestors(inst);
      std::set<std::string> kept;
      std::set_intersection(common.begin(), common.end(), anc.begin(), anc.end(), std::inserter(kept, kept.begin()));
      common = std::move(kept);
    }
    const bool defaulted = std::any_of(common.begin(), common.end(), [&](const std::string& c) {
      auto it = g.concept_node(c).default_values.find(prop);
      return it != g.concept_node(c).default_values.end() && it->second == cluster.value;
    });
    if (defaulted) continue;

    ConceptExtraction ex;
    ex.property = prop;
    ex.value = cluster.value;
    ex.domain = *g.declared_domain(cluster.instances.front(), prop);
    const auto mscc = g.most_specialized_common_concepts(cluster.instances);
    ex.parents.assign(mscc.begin(), mscc.end());
    ex.declares = std::any_of(ex.parents.begin(), ex.parents.end(), [&](const std::string& p) {
      auto d = g.declared_domain(p, prop);
      return !d || !(*d == ex.domain);
    });
    ex.name = unique_name("Auto_" + prop + "_" + hex(fnv1a(prop + "=" + vkey), 8), g, taken);
    taken.insert(ex.name);

    auto above_parent = [&](const std::string& c) {
      return std::any_of(ex.parents.begin(), ex.parents.end(),
                         [&](const std::string& p) { return g.is_subconcept(p, c); });
    };
    for (const auto& inst : cluster.instances) {
      const auto& own = g.instance(inst).property_values;
      auto it = own.find(prop);
      if (it != own.end() && it->second == cluster.value) ex.redundant.push_back(inst);
      const auto definers =
          g.nearest_defining(inst, [&](const ConceptNode& n) { return defines_default(n, prop); });
      const bool rewire_concepts = !definers.empty() && std::none_of(definers.begin(), definers.end(), above_parent);
      if (rewire_concepts) {
        for (const auto& d : definers) add_unique(ex.concepts, d);
      } else {
        add_unique(ex.instances, inst);
      }
    }
    std::sort(ex.concepts.begin(), ex.concepts.end());
    plan.notes.push_back(ex.name + ": " + std::to_string(cluster.instances.size()) + " instances share " + prop +
                         " = " + cluster.value.to_string());
    if (!ex.redundant.empty())
      plan.notes.push_back(ex.name + ": explicit values kept on " + std::to_string(ex.redundant.size()) +
                           " instances though they repeat the new default");
    plan.concepts.push_back(std::move(ex));
  }
  return plan;
}

RestructurePlan extract_functions(const KnowledgeBase& kb, const RestructureOptions& options) {
  return FunctionExtractor(kb, options).run();
}

RestructurePlan extract_all(const KnowledgeBase& kb, const RestructureOptions& options) {
  RestructurePlan plan = extract_concepts(kb, options);
  RestructurePlan fns = extract_functions(kb, options);
  std::set<std::string> names;
  for (const auto& c : plan.concepts) names.insert(c.name);
  for (const auto& f : fns.functions)
    if (names.count(f.name)) throw std::logic_error("generated name collision: " + f.name);
  plan.functions = std::move(fns.functions);
  plan.rewrites = std::move(fns.rewrites);
  plan.notes.insert(plan.notes.end(), fns.notes.begin(), fns.notes.end());
  return plan;
}

void apply_plan(KnowledgeBase& kb, const RestructurePlan& plan) {
  if (graph_fingerprint(kb.graph) != plan.fingerprint)
    throw Error("stale-plan", "the hierarchy changed since the plan was computed");
  if (plan.empty()) return;
  const auto before = resolution_table(kb.graph);

  KnowledgeBase next = kb;
  Hierarchy& g = next.graph;
  for (const auto& c : plan.concepts) {
    ConceptNode node;
    node.name = c.name;
    node.direct_parents = c.parents;
    if (c.declares) node.property_decls.emplace(c.property, c.domain);
    node.default_values.emplace(c.property, c.value);
    g.add_concept(std::move(node));
    for (const auto& inst : c.instances) add_unique(g.instance(inst).member_concepts, c.name);
    for (const auto& con : c.concepts) add_unique(g.concept_node(con).direct_parents, c.name);
  }
  for (const auto& f : plan.functions) {
    ConceptNode node;
    node.name = f.name;
    node.direct_parents = f.parents;
    node.raw_data = {{"interface", signature_to_json(f.signature)}, {"procedure", f.procedure}};
    g.add_concept(std::move(node));
  }
  for (const auto& r : plan.rewrites) {
    json& data = g.concept_node(r.concept_name).raw_data;
    const json::json_pointer ptr(r.pointer);
    if (!data.contains(ptr) || data.at(ptr) != r.before)
      throw Error("stale-plan", "procedure at " + r.concept_name + r.pointer + " differs from the plan");
    data[ptr] = r.after;
  }

  auto diags = next.finalize();
  if (has_errors(diags)) throw ValidationError(std::move(diags));
  const auto after = resolution_table(g);
  for (const auto& [key, v] : before) {
    auto it = after.find(key);
    if (it == after.end() || it->second != v)
      throw Error("semantics", "resolved value of " + key.first + "." + key.second + " would change");
  }
  kb = std::move(next);
}

void revert_plan(KnowledgeBase& kb, const RestructurePlan& plan) {
  KnowledgeBase prev = kb;
  Hierarchy& g = prev.graph;
  for (const auto& r : plan.rewrites) g.concept_node(r.concept_name).raw_data[json::json_pointer(r.pointer)] = r.before;
  for (auto it = plan.functions.rbegin(); it != plan.functions.rend(); ++it) g.remove_concept(it->name);
  for (auto it = plan.concepts.rbegin(); it != plan.concepts.rend(); ++it) {
    for (const auto& inst : it->instances) remove_value(g.instance(inst).member_concepts, it->name);
    for (const auto& con : it->concepts) remove_value(g.concept_node(con).direct_parents, it->name);
    g.remove_concept(it->name);
  }
  auto diags = prev.finalize();
  if (has_errors(diags)) throw ValidationError(std::move(diags));
  if (graph_fingerprint(g) != plan.fingerprint)
    throw Error("stale-plan", "the hierarchy does not match the plan's result");
  kb = std::move(prev);
}

json plan_to_json(const RestructurePlan& plan) {
  json concepts = json::array();
  for (const auto& c : plan.concepts)
    concepts.push_back({{"name", c.name},
                        {"parents", c.parents},
                        {"property", c.property},
                        {"domain", c.domain.to_string()},
                        {"value", value_to_json(c.value)},
                        {"declares", c.declares},
                        {"instances", c.instances},
                        {"concepts", c.concepts},
                        {"redundant", c.redundant}});
  json functions = json::array();
  for (const auto& f : plan.functions)
    functions.push_back({{"name", f.name},
                         {"parents", f.parents},
                         {"interface", signature_to_json(f.signature)},
                         {"procedure", f.procedure},
                         {"occurrences", f.occurrences}});
  json rewrites = json::array();
  for (const auto& r : plan.rewrites)
    rewrites.push_back({{"concept", r.concept_name}, {"pointer", r.pointer}, {"before", r.before}, {"after", r.after}});
  return {{"fingerprint", plan.fingerprint},
          {"new_concepts", concepts},
          {"new_functions", functions},
          {"rewrites", rewrites},
          {"notes", plan.notes}};
}

RestructurePlan plan_from_json(const json& doc, const Hierarchy& graph) {
  try {
    RestructurePlan plan;
    plan.fingerprint = doc.at("fingerprint").get<std::string>();
    for (const auto& c : doc.at("new_concepts")) {
      ConceptExtraction ex;
      ex.name = c.at("name").get<std::string>();
      ex.parents = c.at("parents").get<std::vector<std::string>>();
      ex.property = c.at("property").get<std::string>();
      ex.domain = Domain::parse(c.at("domain").get<std::string>());
      ex.value = value_from_json(c.at("value"), ex.domain, &graph);
      ex.declares = c.at("declares").get<bool>();
      ex.instances = c.at("instances").get<std::vector<std::string>>();
      ex.concepts = c.at("concepts").get<std::vector<std::string>>();
      ex.redundant = c.value("redundant", std::vector<std::string>{});
      plan.concepts.push_back(std::move(ex));
    }
    for (const auto& f : doc.at("new_functions")) {
      FunctionExtraction fx;
      fx.name = f.at("name").get<std::string>();
      fx.parents = f.at("parents").get<std::vector<std::string>>();
      const json& iface = f.at("interface");
      fx.signature.arguments = iface.at("arguments").get<std::vector<std::string>>();
      for (const auto& a : fx.signature.arguments)
        fx.signature.domains.emplace(a, Domain::parse(iface.at(a).get<std::string>()));
      if (iface.contains("res")) fx.signature.result = Domain::parse(iface.at("res").get<std::string>());
      fx.procedure = f.at("procedure");
      fx.occurrences = f.value("occurrences", size_t{0});
      plan.functions.push_back(std::move(fx));
    }
    for (const auto& r : doc.at("rewrites"))
      plan.rewrites.push_back({r.at("concept").get<std::string>(), r.at("pointer").get<std::string>(), r.at("before"),
                               r.at("after")});
    plan.notes = doc.value("notes", std::vector<std::string>{});
    return plan;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed plan: ") + e.what());
  }
}

}  // namespace chkb
