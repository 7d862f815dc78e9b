#include "chkb/io.hpp"

#include <fstream>
#include <sstream>

namespace chkb {

namespace {

const std::set<std::string> kConceptKeys = {
    "properties", "hooks",   "interface",          "procedure",     "geometryData", "surfaces",
    "propertyValues", "agents", "entities",        "parameters",    "preconditions", "check",
    "success",    "effects", "actionAssociations", "manipulations", "bt",           "abilities"};
const std::set<std::string> kInstanceKeys = {"propertyValues", "geometryData", "surfaces"};

std::string pointer_token(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

size_t line_of(const std::string& text, size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Parses JSON, reporting duplicate object keys (CH005) and syntax errors (CH022).
std::optional<json> parse_document(const std::string& text, std::vector<Diagnostic>& diags) {
  struct Level {
    bool array = false;
    size_t index = 0;
    std::string key;
    std::set<std::string> keys;
  };
  std::vector<Level> stack;
  auto pointer = [&](const std::string& key) {
    std::string p;
    for (size_t i = 0; i + 1 < stack.size(); ++i)
      p += "/" + (stack[i].array ? std::to_string(stack[i].index - 1) : pointer_token(stack[i].key));
    return p + "/" + pointer_token(key);
  };
  auto element = [&]() {
    if (!stack.empty() && stack.back().array) ++stack.back().index;
  };
  json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        element();
        stack.push_back({false, 0, "", {}});
        break;
      case json::parse_event_t::array_start:
        element();
        stack.push_back({true, 0, "", {}});
        break;
      case json::parse_event_t::object_end:
      case json::parse_event_t::array_end:
        stack.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        stack.back().key = key;
        if (!stack.back().keys.insert(key).second)
          diags.push_back({"CH005", key, "duplicate key '" + key + "'", pointer(key)});
        break;
      }
      case json::parse_event_t::value:
        element();
        break;
    }
    return true;
  };
  try {
    return json::parse(text, cb);
  } catch (const json::parse_error& e) {
    const size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    diags.push_back({"CH022", "", e.what(), "", false});
    diags.back().location = "line " + std::to_string(line);
    return std::nullopt;
  }
}

std::vector<std::string> string_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw TypeMismatch(what + " must be an array of names");
  std::vector<std::string> out;
  for (const auto& x : j) {
    if (!x.is_string()) throw TypeMismatch(what + " must be an array of names");
    out.push_back(x.get<std::string>());
  }
  return out;
}

struct PendingValues {
  std::string owner;
  std::string pointer;
  json values;  // property -> JSON value
};

class Loader {
public:
  Loader(const LoadOptions& options, std::vector<Diagnostic>& diags) : options_(options), diags_(diags) {}

  void unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& node,
                    const std::string& ptr) {
    for (const auto& [k, v] : obj.items())
      if (!known.count(k))
        diags_.push_back({"CH008", node, "unknown key '" + k + "'", ptr + "/" + pointer_token(k), !options_.strict});
  }

  void error(const std::string& code, const std::string& node, const std::string& msg, const std::string& ptr) {
    diags_.push_back({code, node, msg, ptr});
  }

  void concept_entry(Hierarchy& g, const std::string& name, const json& entry) {
    const std::string ptr = "/concepts/" + pointer_token(name);
    if (!entry.is_object()) return error("CH022", name, "concept entry must be an object", ptr);
    unknown_keys(entry, {"direct_parents", "data"}, name, ptr);
    ConceptNode node;
    node.name = name;
    try {
      if (entry.contains("direct_parents"))
        node.direct_parents = string_list(entry.at("direct_parents"), "direct_parents");
      const json data = entry.value("data", json::object());
      if (!data.is_object()) return error("CH022", name, "data must be an object", ptr + "/data");
      unknown_keys(data, kConceptKeys, name, ptr + "/data");
      node.raw_data = data;
      if (data.contains("properties")) {
        const json& props = data.at("properties");
        if (!props.is_object()) return error("CH022", name, "properties must be an object", ptr + "/data/properties");
        for (const auto& [prop, dom] : props.items()) {
          if (prop == "default") {
            if (!dom.is_object())
              return error("CH022", name, "default must be an object", ptr + "/data/properties/default");
            defaults_.push_back({name, ptr + "/data/properties/default", dom});
            continue;
          }
          if (!dom.is_string()) {
            error("CH022", name, "domain of '" + prop + "' must be a string", ptr + "/data/properties/" + pointer_token(prop));
            continue;
          }
          try {
            node.property_decls.emplace(prop, Domain::parse(dom.get<std::string>()));
          } catch (const std::invalid_argument& e) {
            error("CH006", name, e.what(), ptr + "/data/properties/" + pointer_token(prop));
          }
        }
      }
      if (data.contains("propertyValues")) {
        if (!data.at("propertyValues").is_object())
          return error("CH022", name, "propertyValues must be an object", ptr + "/data/propertyValues");
        defaults_.push_back({name, ptr + "/data/propertyValues", data.at("propertyValues")});
      }
      if (data.contains("hooks")) {
        if (!data.at("hooks").is_object()) return error("CH022", name, "hooks must be an object", ptr + "/data/hooks");
        for (const auto& [prop, fn] : data.at("hooks").items()) {
          if (!fn.is_string()) {
            error("CH022", name, "hook of '" + prop + "' must name a function", ptr + "/data/hooks/" + pointer_token(prop));
            continue;
          }
          node.hooks.emplace(prop, fn.get<std::string>());
        }
      }
      if (data.contains("geometryData")) node.geometry = data.at("geometryData");
      if (data.contains("surfaces")) node.surfaces = string_list(data.at("surfaces"), "surfaces");
    } catch (const TypeMismatch& e) {
      return error("CH022", name, e.what(), ptr);
    }
    g.add_concept(std::move(node));
  }

  void instance_entry(Hierarchy& g, const std::string& name, const json& entry, const std::string& section) {
    const std::string ptr = "/" + section + "/" + pointer_token(name);
    if (!entry.is_object()) return error("CH022", name, "instance entry must be an object", ptr);
    unknown_keys(entry, {"direct_parents", "data"}, name, ptr);
    InstanceRecord rec;
    rec.name = name;
    try {
      if (entry.contains("direct_parents"))
        rec.member_concepts = string_list(entry.at("direct_parents"), "direct_parents");
      const json data = entry.value("data", json::object());
      if (!data.is_object()) return error("CH022", name, "data must be an object", ptr + "/data");
      unknown_keys(data, kInstanceKeys, name, ptr + "/data");
      rec.raw_data = data;
      if (data.contains("geometryData")) rec.geometry = data.at("geometryData");
      if (data.contains("surfaces")) rec.surfaces = string_list(data.at("surfaces"), "surfaces");
      if (data.contains("propertyValues")) {
        if (!data.at("propertyValues").is_object())
          return error("CH022", name, "propertyValues must be an object", ptr + "/data/propertyValues");
        values_.push_back({name, ptr + "/data/propertyValues", data.at("propertyValues")});
      }
    } catch (const TypeMismatch& e) {
      return error("CH022", name, e.what(), ptr);
    }
    if (g.has_instance(name)) return error("CH005", name, "duplicate instance", ptr);
    g.add_instance(std::move(rec));
  }

  void decode_defaults(Hierarchy& g) {
    for (const auto& pending : defaults_) {
      auto& node = g.concept_node(pending.owner);
      for (const auto& [prop, j] : pending.values.items()) {
        const std::string ptr = pending.pointer + "/" + pointer_token(prop);
        auto dom = g.declared_domain(pending.owner, prop);
        if (!dom) {
          error("CH007", pending.owner, "default for undeclared property '" + prop + "'", ptr);
          continue;
        }
        try {
          node.default_values[prop] = value_from_json(j, *dom, &g);
        } catch (const TypeMismatch& e) {
          error("CH014", pending.owner, "default for '" + prop + "': " + e.what(), ptr);
        }
      }
    }
  }

  void decode_values(Hierarchy& g) {
    for (const auto& pending : values_) {
      auto& rec = g.instance(pending.owner);
      for (const auto& [prop, j] : pending.values.items()) {
        const std::string ptr = pending.pointer + "/" + pointer_token(prop);
        std::optional<Domain> dom;
        try {
          dom = g.declared_domain(pending.owner, prop);
        } catch (const Error& e) {
          error("CH009", pending.owner, e.what(), ptr);
          break;
        }
        if (!dom) {
          error("CH010", pending.owner, "value for undeclared property '" + prop + "'", ptr);
          continue;
        }
        try {
          rec.property_values[prop] = value_from_json(j, *dom, &g);
        } catch (const TypeMismatch& e) {
          error("CH011", pending.owner, "value for '" + prop + "': " + e.what(), ptr);
        }
      }
    }
  }

private:
  const LoadOptions& options_;
  std::vector<Diagnostic>& diags_;
  std::vector<PendingValues> defaults_;
  std::vector<PendingValues> values_;
};

// Instances whose members are all known, so their declarations can be queried.
bool members_known(const Hierarchy& g, const InstanceRecord& rec) {
  return !rec.member_concepts.empty() && std::all_of(rec.member_concepts.begin(), rec.member_concepts.end(),
                                                     [&](const std::string& m) { return g.has_concept(m); });
}

json patched_data(json data, const std::map<std::string, Value>& values, const char* key, bool keep_empty) {
  json out = json::object();
  for (const auto& [prop, v] : values) out[prop] = value_to_json(v);
  if (!out.empty() || keep_empty) data[key] = out;
  else data.erase(key);
  return data;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadResult load_hierarchy_text(const std::string& text, const LoadOptions& options) {
  LoadResult result;
  auto& diags = result.diagnostics;
  auto doc = parse_document(text, diags);
  if (!doc) return result;
  if (!doc->is_object() || !doc->contains("concepts") || !doc->at("concepts").is_object()) {
    diags.push_back({"CH022", "", "document needs a 'concepts' object", ""});
    return result;
  }
  Loader loader(options, diags);
  loader.unknown_keys(*doc, {"concepts", "instances"}, "", "");
  Hierarchy& g = result.kb.graph;
  for (const auto& [name, entry] : doc->at("concepts").items()) loader.concept_entry(g, name, entry);
  if (doc->contains("instances")) {
    if (!doc->at("instances").is_object()) {
      diags.push_back({"CH022", "", "'instances' must be an object", "/instances"});
    } else {
      for (const auto& [name, entry] : doc->at("instances").items()) loader.instance_entry(g, name, entry, "instances");
    }
  }
  if (has_errors(diags)) return result;
  try {
    g.rebuild_index();
  } catch (const ValidationError& e) {
    diags.insert(diags.end(), e.diagnostics().begin(), e.diagnostics().end());
    return result;
  }
  loader.decode_defaults(g);
  loader.decode_values(g);
  if (has_errors(diags)) return result;
  auto more = result.kb.finalize();
  diags.insert(diags.end(), more.begin(), more.end());
  return result;
}

LoadResult load_hierarchy_file(const std::string& path, const LoadOptions& options) {
  return load_hierarchy_text(read_file(path), options);
}

json serialize_hierarchy(const Hierarchy& graph) {
  json concepts = json::object();
  for (const auto& [name, node] : graph.concepts()) {
    json data = node.raw_data.is_object() ? node.raw_data : json::object();
    // Defaults read from propertyValues are written back there.
    std::map<std::string, Value> in_values, in_default;
    const json raw_values = data.value("propertyValues", json::object());
    for (const auto& [prop, v] : node.default_values)
      (raw_values.contains(prop) ? in_values : in_default)[prop] = v;

    const bool had_props = data.contains("properties");
    if (had_props || !node.property_decls.empty() || !in_default.empty()) {
      json props = json::object();
      for (const auto& [prop, dom] : node.property_decls) props[prop] = dom.to_string();
      if (!in_default.empty()) props["default"] = patched_data(json::object(), in_default, "d", false)["d"];
      data["properties"] = props;
    }
    const bool had_values = data.contains("propertyValues");
    data = patched_data(std::move(data), in_values, "propertyValues", had_values);
    if (!node.hooks.empty()) {
      json hooks = json::object();
      for (const auto& [prop, fn] : node.hooks) hooks[prop] = fn;
      data["hooks"] = hooks;
    } else {
      data.erase("hooks");
    }
    if (!node.geometry.is_null()) data["geometryData"] = node.geometry;
    else data.erase("geometryData");
    if (!node.surfaces.empty()) data["surfaces"] = node.surfaces;
    else data.erase("surfaces");
    concepts[name] = {{"direct_parents", node.direct_parents}, {"data", data}};
  }
  json instances = json::object();
  for (const auto& [name, rec] : graph.instances()) {
    json data = rec.raw_data.is_object() ? rec.raw_data : json::object();
    const bool had_values = data.contains("propertyValues");
    data = patched_data(std::move(data), rec.property_values, "propertyValues", had_values);
    if (!rec.geometry.is_null()) data["geometryData"] = rec.geometry;
    else data.erase("geometryData");
    if (!rec.surfaces.empty()) data["surfaces"] = rec.surfaces;
    else data.erase("surfaces");
    instances[name] = {{"direct_parents", rec.member_concepts}, {"data", data}};
  }
  return {{"concepts", concepts}, {"instances", instances}};
}

std::map<std::string, InstanceRecord> load_state_text(const std::string& text, const Hierarchy& base) {
  std::vector<Diagnostic> diags;
  auto doc = parse_document(text, diags);
  if (!doc) throw ValidationError(diags);
  if (!doc->is_object() || !doc->contains("instances") || !doc->at("instances").is_object())
    throw ValidationError({{"CH022", "", "state file needs an 'instances' object", ""}});

  Hierarchy g;
  for (const auto& [name, node] : base.concepts()) g.add_concept(node);
  LoadOptions options;
  Loader loader(options, diags);
  loader.unknown_keys(*doc, {"concepts", "instances"}, "", "");
  for (const auto& [name, entry] : doc->at("instances").items()) loader.instance_entry(g, name, entry, "instances");
  g.rebuild_index();
  for (const auto& [name, rec] : g.instances()) {
    if (!members_known(g, rec)) {
      diags.push_back({"CH009", name, "instance needs known member concepts", "/instances/" + pointer_token(name)});
      continue;
    }
  }
  if (has_errors(diags)) throw ValidationError(diags);
  loader.decode_values(g);
  for (const auto& [name, rec] : g.instances())
    for (const auto& [prop, value] : rec.property_values) {
      const auto dom = g.declared_domain(name, prop);
      if (!value.is_unknown() && !typecheck_value(value, *dom, g))
        diags.push_back({"CH011", name, "value " + value.to_string() + " for '" + prop + "' is not a " + dom->to_string(),
                         "/instances/" + pointer_token(name) + "/data/propertyValues/" + pointer_token(prop)});
    }
  if (has_errors(diags)) throw ValidationError(diags);
  return g.instances();
}

std::map<std::string, InstanceRecord> load_state_file(const std::string& path, const Hierarchy& base) {
  return load_state_text(read_file(path), base);
}

std::vector<Frame> load_trace(std::istream& in) {
  std::vector<Frame> frames;
  std::string line;
  size_t number = 0;
  auto fail = [&](const std::string& msg) { throw std::runtime_error("line " + std::to_string(number) + ": " + msg); };
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(e.what());
    }
    if (!rec.is_object() || !rec.contains("timestamp") || !rec.at("timestamp").is_number())
      fail("record needs a numeric 'timestamp'");
    Frame f;
    f.timestamp = rec.at("timestamp").get<double>();
    if (!frames.empty() && !(f.timestamp > frames.back().timestamp))
      fail("timestamp " + std::to_string(f.timestamp) + " does not increase");
    const json entities = rec.value("entities", json::object());
    for (const auto& [name, arr] : entities.items()) {
      std::vector<double> nums;
      if (arr.is_array())
        for (const auto& x : arr) {
          if (!x.is_number()) fail("pose of '" + name + "' must hold numbers");
          nums.push_back(x.get<double>());
        }
      else
        fail("pose of '" + name + "' must be an array");
      try {
        f.entity_poses.emplace(name, pose_from_array(nums));
      } catch (const std::invalid_argument& e) {
        fail("pose of '" + name + "': " + e.what());
      }
    }
    const json hands = rec.value("hands", json::object());
    for (const auto& [name, arr] : hands.items()) {
      if (!arr.is_array() || arr.size() != 3 || !std::all_of(arr.begin(), arr.end(), [](const json& x) { return x.is_number(); }))
        fail("hand '" + name + "' must be [x, y, z]");
      f.hand_positions.emplace(name, Eigen::Vector3d(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()));
    }
    if (rec.contains("contacts")) {
      const json& cs = rec.at("contacts");
      if (!cs.is_array()) fail("contacts must be an array of pairs");
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& c : cs) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_string() || !c[1].is_string())
          fail("contacts must be an array of name pairs");
        pairs.emplace_back(c[0].get<std::string>(), c[1].get<std::string>());
      }
      f.contacts = std::move(pairs);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<Frame> load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return load_trace(in);
}

}  // namespace chkb
