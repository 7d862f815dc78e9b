#include <doctest.h>

#include "oracles/generators.hpp"
#include "support.hpp"
#include "chkb/io.hpp"
#include "chkb/recognizer.hpp"

using namespace chkb;

namespace {

struct Run {
  std::string events;
  std::string lanes;
};

Run recognize_pouring() {
  Environment env(testing::load_fixture("household.json"));
  Recognizer rec(env);
  for (const auto& f : load_trace_file(testing::fixture("pouring_trace.jsonl"))) rec.step(f);
  rec.finish();
  return {export_events(rec.timeline()).dump(2) + "\n", export_lanes(rec.timeline(), env.kb().graph)};
}

// Agents below Agent; entity parameters x, y, z of the skill take any Thing.
KnowledgeBase juggling_world(size_t n_agents, size_t n_objects, size_t k, bool agents_are_things) {
  json concepts = {
      {"Concept", {{"direct_parents", json::array()}, {"data", json::object()}}},
      {"Thing", {{"direct_parents", {"Concept"}}, {"data", json::object()}}},
      {"Agent", {{"direct_parents", {agents_are_things ? "Thing" : "Concept"}}, {"data", json::object()}}},
      {"Skill", {{"direct_parents", {"Concept"}}, {"data", json::object()}}},
  };
  json entities = json::object();
  for (size_t i = 0; i < k; ++i) entities[std::string(1, static_cast<char>('x' + i))] = "Thing";
  concepts["Juggle"] = {{"direct_parents", {"Skill"}}, {"data", {{"agents", {{"a", "Agent"}}}, {"entities", entities}}}};
  json instances = json::object();
  for (size_t i = 0; i < n_agents; ++i)
    instances["A" + std::to_string(i)] = {{"direct_parents", {"Agent"}}, {"data", json::object()}};
  for (size_t i = 0; i < n_objects; ++i)
    instances["O" + std::to_string(i)] = {{"direct_parents", {"Thing"}}, {"data", json::object()}};
  return testing::load_text(json{{"concepts", concepts}, {"instances", instances}}.dump());
}

std::vector<std::string> names(const std::string& prefix, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("pouring trace matches the committed golden events") {
  const auto run = recognize_pouring();
  CHECK(run.events == read_file(testing::fixture("pouring_events.golden.json")));
  CHECK(run.lanes.find("LeftHand: [1.50-2.50] Close(successful) [3.50-4.50] Open(successful)") != std::string::npos);
  CHECK(run.lanes.find("Pouring(successful)") != std::string::npos);
}

TEST_CASE("recognition is deterministic") {
  const auto first = recognize_pouring();
  const auto second = recognize_pouring();
  CHECK(first.events == second.events);
  CHECK(first.lanes == second.lanes);
}

TEST_CASE("recognition invariants hold at every frame") {
  Environment env(testing::load_fixture("household.json"));
  Recognizer rec(env);
  const auto frames = load_trace_file(testing::fixture("pouring_trace.jsonl"));
  std::vector<SkillEvent> stepped;
  for (const auto& f : frames) {
    for (auto& e : rec.step(f)) stepped.push_back(e);

    std::set<std::string> keys;
    std::map<std::string, std::set<std::string>> manipulated;  // object -> grippers
    for (const auto& s : rec.active()) {
      REQUIRE(keys.insert(s.def->name + bindings_to_json(s.bindings).dump()).second);
      for (const auto& [agent, gripper, object] : s.manipulations) {
        REQUIRE(env.agent_of(gripper) == agent);
        REQUIRE(env.iv_objects(gripper).count(object));
        manipulated[object].insert(gripper);
      }
    }
    // graspedBy backlinks and registered manipulations index each other.
    std::map<std::string, std::set<std::string>> grasped;
    for (const auto& [o, gs] : env.grasped_by)
      if (!gs.empty()) grasped[o] = gs;
    REQUIRE(grasped == manipulated);
  }
  for (auto& e : rec.finish()) stepped.push_back(e);
  REQUIRE(stepped.size() == rec.timeline().size());
  for (const auto& e : rec.timeline()) {
    CHECK(e.t_end >= e.t_start);
    if (e.outcome != Outcome::Successful) CHECK(e.actions.empty());
  }
  CHECK(rec.effects_applied() > 0);
}

TEST_CASE("touching the ground never starts a transport of it") {
  Environment env(testing::load_fixture("household.json"));
  Recognizer rec(env);
  for (const auto& f : load_trace_file(testing::fixture("pouring_trace.jsonl"))) rec.step(f);
  rec.finish();
  size_t transports = 0;
  for (const auto& e : rec.timeline()) {
    for (const auto& [k, v] : e.params) CHECK_FALSE(v == Value::entity("GroundInstance"));
    if (e.skill == "Transport") {
      ++transports;
      CHECK(e.params.at("o") == Value::entity("MilkCartonLidlInstance"));
    }
  }
  CHECK(transports >= 1);
}

TEST_CASE("a frame without agents produces nothing") {
  Environment env(testing::load_fixture("bookshelf.json"));
  Recognizer rec(env);
  Frame f;
  f.timestamp = 0.0;
  f.entity_poses["RedBook"] = Pose::from_translation({1, 1, 1});
  CHECK(rec.step(f).empty());
  CHECK(rec.active().empty());
  CHECK(rec.finish().empty());
  CHECK(export_events(rec.timeline()) == json::array());
}

TEST_CASE("pouring tuples cover both container orders") {
  auto kb = testing::load_fixture("household.json");
  const auto tuples = generate_parameter_tuples(kb.graph, kb.acts.def("Pouring"), {"HumanInstance"},
                                                {"RightHand", "MilkCartonLidlInstance", "WhiteBowl"});
  std::set<std::pair<std::string, std::string>> orders;
  for (const auto& b : tuples) {
    CHECK_FALSE(b.count("what"));
    orders.insert({b.at("from").as_entity(), b.at("into").as_entity()});
  }
  CHECK(orders == std::set<std::pair<std::string, std::string>>{{"MilkCartonLidlInstance", "WhiteBowl"},
                                                               {"WhiteBowl", "MilkCartonLidlInstance"}});
  CHECK(generate_parameter_tuples(kb.graph, kb.acts.def("Pouring"), {"HumanInstance"}, {"RightHand", "WhiteBowl"})
            .empty());
}

TEST_CASE("tuple count follows the injective mapping formula") {
  gen::Rng rng(91);
  for (int round = 0; round < 60; ++round) {
    const size_t n_agents = 1 + gen::pick(rng, 3), n_objects = gen::pick(rng, 6), k = 1 + gen::pick(rng, 3);
    const bool agents_are_things = gen::coin(rng);
    auto kb = juggling_world(n_agents, n_objects, k, agents_are_things);
    const auto tuples =
        generate_parameter_tuples(kb.graph, kb.acts.def("Juggle"), names("A", n_agents), names("O", n_objects));
    // Each agent binding leaves the other agents available as entities when they are Things.
    const size_t entity_pool = n_objects + (agents_are_things ? n_agents - 1 : 0);
    REQUIRE(tuples.size() == n_agents * oracle::permutations(entity_pool, k));
    std::set<std::string> distinct;
    for (const auto& b : tuples) distinct.insert(bindings_to_json(b).dump());
    REQUIRE(distinct.size() == tuples.size());
  }
}

TEST_CASE("optional value parameters stay unknown when they cannot be extracted") {
  auto kb = testing::load_fixture("household.json");
  auto ctx = kb.read_context();
  Bindings transport = {{"a", Value::entity("HumanInstance")},
                        {"g", Value::entity("RightHand")},
                        {"o", Value::entity("MilkCartonLidlInstance")}};
  CHECK(fill_value_params(kb.functions, kb.acts.def("Transport"), transport, ctx));
  CHECK(transport.at("toLocation").is_unknown());

  Bindings pour = {{"a", Value::entity("HumanInstance")},
                   {"g", Value::entity("RightHand")},
                   {"from", Value::entity("MilkCartonLidlInstance")},
                   {"into", Value::entity("WhiteBowl")}};
  CHECK(fill_value_params(kb.functions, kb.acts.def("Pouring"), pour, ctx));
  CHECK(pour.at("what") == Value::entity("Milk"));
  Bindings empty = pour;
  empty.erase("what");
  empty["from"] = Value::entity("WhiteBowl");
  empty["into"] = Value::entity("MilkCartonLidlInstance");
  CHECK_FALSE(fill_value_params(kb.functions, kb.acts.def("Pouring"), empty, ctx));
}

TEST_CASE("the caller's hierarchy is untouched by recognition") {
  const auto kb = testing::load_fixture("household.json");
  const json before = serialize_hierarchy(kb.graph);
  Environment env(kb);
  Recognizer rec(env);
  for (const auto& f : load_trace_file(testing::fixture("pouring_trace.jsonl"))) rec.step(f);
  rec.finish();
  CHECK(serialize_hierarchy(kb.graph) == before);
  CHECK_FALSE(serialize_hierarchy(env.kb().graph) == before);
}

TEST_CASE("cutting the trace never changes events emitted before the cut") {
  const auto kb = testing::load_fixture("household.json");
  const auto frames = load_trace_file(testing::fixture("pouring_trace.jsonl"));
  auto emitted = [&](size_t cut) {
    Environment env(kb);
    Recognizer rec(env);
    std::vector<std::string> out;
    for (size_t i = 0; i < cut; ++i)
      for (const auto& e : rec.step(frames[i])) out.push_back(export_events({e}).dump());
    return out;
  };
  const auto full = emitted(frames.size());
  for (size_t cut : {50, 150, 300, 420, 599}) {
    const auto prefix = emitted(cut);
    REQUIRE(prefix.size() <= full.size());
    CHECK(std::equal(prefix.begin(), prefix.end(), full.begin()));
  }
}
