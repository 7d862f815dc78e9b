#include <doctest.h>

#include "oracles/generators.hpp"
#include "support.hpp"
#include "chkb/acts.hpp"

using namespace chkb;

namespace {

Bindings pouring_bindings() {
  return {{"a", Value::entity("HumanInstance")},       {"g", Value::entity("RightHand")},
          {"g2", Value::entity("LeftHand")},           {"from", Value::entity("MilkCartonLidlInstance")},
          {"into", Value::entity("WhiteBowl")},        {"what", Value::entity("Milk")}};
}

}  // namespace

TEST_CASE("restrictions exclude subconcepts") {
  auto kb = testing::load_fixture("birds.json");
  CHECK(affordances(kb.graph, "SparrowInstance", kb.acts) == Affordance{{"Fly", "a"}});
  CHECK(affordances(kb.graph, "PenguinInstance", kb.acts).empty());
  const ParamSpec spec{{"Bird"}, {"Penguin"}};
  CHECK(entity_matches_parameter(kb.graph, "SparrowInstance", spec));
  CHECK_FALSE(entity_matches_parameter(kb.graph, "PenguinInstance", spec));
  CHECK_THROWS_AS(entity_matches_parameter(kb.graph, "SparrowInstance", ParamSpec{{"Dragon"}, {}}), LookupError);
}

TEST_CASE("household affordances") {
  auto kb = testing::load_fixture("household.json");
  const auto carton = affordances(kb.graph, "MilkCartonLidlInstance", kb.acts);
  CHECK(carton.count({"Transport", "o"}));
  CHECK(carton.count({"Pouring", "from"}));
  CHECK(carton.count({"Close", "o"}));
  CHECK(carton.count({"TransferContent", "to"}));
  CHECK(affordances(kb.graph, "GroundInstance", kb.acts).empty());
  const auto human = affordances(kb.graph, "HumanInstance", kb.acts);
  CHECK(human.count({"Transport", "a"}));
  CHECK_FALSE(human.count({"Transport", "o"}));
}

TEST_CASE("manipulations default and override") {
  auto kb = testing::load_fixture("household.json");
  const auto b = pouring_bindings();
  const auto one = manipulations_of(kb.acts.def("Pouring"), b);
  CHECK(std::set<Manipulation>(one.begin(), one.end()) ==
        std::set<Manipulation>{{"HumanInstance", "RightHand", "MilkCartonLidlInstance"}});
  const auto two = manipulations_of(kb.acts.def("PouringWith2Grippers"), b);
  CHECK(std::set<Manipulation>(two.begin(), two.end()) ==
        std::set<Manipulation>{{"HumanInstance", "RightHand", "MilkCartonLidlInstance"},
                               {"HumanInstance", "LeftHand", "WhiteBowl"}});
}

TEST_CASE("child skills inherit stages from an abstract parent") {
  auto kb = testing::load_fixture("household.json");
  const auto& close = kb.acts.def("Close");
  const auto& open = kb.acts.def("Open");
  const auto& close_check = kb.functions.def(close.stages.at(Stage::Check));
  const auto& open_check = kb.functions.def(open.stages.at(Stage::Check));
  REQUIRE(close_check.procedure);
  CHECK(*close_check.procedure == *open_check.procedure);
  CHECK(close.manipulations.size() == 1);
  CHECK_FALSE(kb.acts.has("LidManipulation"));
}

TEST_CASE("affordances equal a scan over every parameter spec") {
  gen::Rng rng(61);
  for (int round = 0; round < 50; ++round) {
    auto w = gen::random_act_world(rng);
    auto kb = testing::load_text(w.doc.dump());
    for (const auto& e : w.entities) {
      Affordance expect;
      for (const auto& d : w.defs)
        for (const auto& p : d.params)
          if (oracle::matches(w.parents, e, p)) expect.insert({d.name, p.name});
      REQUIRE(affordances(kb.graph, e, kb.acts) == expect);
    }
  }
}

TEST_CASE("merged affordances equal brute-force enumeration") {
  gen::Rng rng(62);
  size_t nonempty = 0;
  for (int round = 0; round < 100; ++round) {
    auto w = gen::random_act_world(rng, 30, 10);
    auto kb = testing::load_text(w.doc.dump());
    for (size_t n = 1; n <= 3; ++n) {
      std::vector<std::string> picked;
      for (size_t i = 0; i < n; ++i) picked.push_back(w.entities[gen::pick(rng, w.entities.size())]);
      const auto expect = oracle::brute_merge(w.parents, w.defs, picked);
      nonempty += !expect.empty();
      REQUIRE(merge_affordances(kb.graph, picked, kb.acts) == expect);
    }
  }
  CHECK(nonempty > 50);
}

TEST_CASE("stages evaluate with the bound parameters") {
  auto kb = testing::load_fixture("household.json");
  auto ctx = kb.read_context();
  const auto& transfer = kb.acts.def("TransferContent");
  Bindings b = {{"from", Value::entity("MilkCartonLidlInstance")},
                {"to", Value::entity("WhiteBowl")},
                {"what", Value::entity("Milk")}};
  CHECK(bindings_match(kb.graph, transfer, b));
  CHECK(run_stage(kb.functions, transfer, Stage::Pre, b, ctx) == true);
  // Actions carry no check or success stage; both count as true.
  CHECK(run_stage(kb.functions, transfer, Stage::Check, b, ctx) == true);
  CHECK(run_stage(kb.functions, transfer, Stage::Succ, b, ctx) == true);
  Bindings swapped = b;
  swapped["from"] = Value::entity("WhiteBowl");
  CHECK(run_stage(kb.functions, transfer, Stage::Pre, swapped, ctx) == false);
  CHECK_FALSE(bindings_match(kb.graph, transfer, {{"from", Value::entity("Milk")}, {"to", Value::entity("WhiteBowl")},
                                                  {"what", Value::entity("Milk")}}));

  SUBCASE("effects need a writable context") {
    CHECK_THROWS_AS(run_stage(kb.functions, transfer, Stage::Eff, b, ctx), EvalError);
  }
  SUBCASE("effects move the content") {
    EvalContext w{&kb.graph, &kb.graph};
    CHECK_FALSE(run_stage(kb.functions, transfer, Stage::Eff, b, w).has_value());
    CHECK(kb.graph.resolve_property("MilkCartonLidlInstance", "content") == Value::sequence("Substance"));
    CHECK(kb.graph.resolve_property("WhiteBowl", "content") == Value::sequence("Substance", {Value::entity("Milk")}));
    CHECK(kb.graph.resolve_property("Milk", "location").as_location().reference == "WhiteBowl");
  }
}

TEST_CASE("stage errors name the stage") {
  auto kb = testing::load_fixture("household.json");
  auto ctx = kb.read_context();
  const auto& close = kb.acts.def("Close");
  // A fresh instance has no isOpen value, so the precondition is unverifiable.
  kb.graph.add_instance(InstanceRecord{"Jar", {"MilkContainer"}, {}, nullptr, {}, json::object()});
  Bindings b = {{"a", Value::entity("HumanInstance")}, {"g", Value::entity("LeftHand")}, {"o", Value::entity("Jar")}};
  try {
    run_stage(kb.functions, close, Stage::Pre, b, ctx);
    FAIL("expected an evaluation error");
  } catch (const EvalError& e) {
    CHECK(std::string(e.what()).find("preconditions") != std::string::npos);
  }
}

TEST_CASE("derived actions follow the associations") {
  auto kb = testing::load_fixture("household.json");
  const auto& transport = kb.acts.def("Transport");
  const Bindings b = {{"a", Value::entity("HumanInstance")},
                      {"g", Value::entity("RightHand")},
                      {"o", Value::entity("MilkCartonLidlInstance")},
                      {"toLocation", Value::unknown()}};
  const auto actions = derive_actions(kb.graph, transport, b);
  REQUIRE(actions.size() == 1);
  CHECK(actions[0].action == "ChangeLocation");
  CHECK(actions[0].params.at("what") == Value::entity("MilkCartonLidlInstance"));
  CHECK(actions[0].params.at("newLocation") == kb.graph.resolve_property("MilkCartonLidlInstance", "location"));

  const auto pour = derive_actions(kb.graph, kb.acts.def("Pouring"), pouring_bindings());
  REQUIRE(pour.size() == 1);
  CHECK(pour[0] == ActionInstance{"TransferContent",
                                  {{"from", Value::entity("MilkCartonLidlInstance")},
                                   {"to", Value::entity("WhiteBowl")},
                                   {"what", Value::entity("Milk")}}});
}

TEST_CASE("structural errors in act definitions") {
  const char* both = R"({"concepts": {
      "Concept": {"direct_parents": [], "data": {}},
      "Thing": {"direct_parents": ["Concept"], "data": {}},
      "Sub": {"direct_parents": ["Thing"], "data": {}},
      "Action": {"direct_parents": ["Concept"], "data": {}},
      "Poke": {"direct_parents": ["Action"], "data": {"entities": {"x": {"concepts": ["Sub"], "restrictions": ["Sub"]}}}}},
    "instances": {}})";
  auto r = load_hierarchy_text(both);
  CHECK_FALSE(r.ok());
  const char* agents = R"({"concepts": {
      "Concept": {"direct_parents": [], "data": {}},
      "Thing": {"direct_parents": ["Concept"], "data": {}},
      "Action": {"direct_parents": ["Concept"], "data": {}},
      "Poke": {"direct_parents": ["Action"], "data": {"agents": {"a": "Thing"}, "entities": {"x": "Thing"}}}},
    "instances": {}})";
  auto r2 = load_hierarchy_text(agents);
  CHECK_FALSE(r2.ok());
  CHECK(testing::has_code(r2.diagnostics, "CH017"));
}
