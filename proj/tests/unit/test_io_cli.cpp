#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "chkb/cli.hpp"
#include "chkb/io.hpp"

using namespace chkb;

namespace {

struct CliResult {
  int status;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "chkb_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

const char* kRootOnly = R"({"concepts": {"Concept": {"direct_parents": [], "data": {}}}, "instances": {}})";

}  // namespace

TEST_CASE("the bundled fixtures load cleanly") {
  for (const std::string name : {"household.json", "birds.json", "bookshelf.json", "restructure.json", "objects.json"}) {
    CAPTURE(name);
    const auto r = load_hierarchy_file(testing::fixture(name), LoadOptions{true});
    CHECK(r.diagnostics.empty());
  }
}

TEST_CASE("a hierarchy with only the root is valid") {
  const auto r = load_hierarchy_text(kRootOnly);
  CHECK(r.ok());
  CHECK(r.kb.graph.concepts().size() == 1);
}

TEST_CASE("load diagnostics carry codes and locations") {
  SUBCASE("cycle") {
    const auto r = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "A": {"direct_parents": ["B"], "data": {}},
        "B": {"direct_parents": ["A"], "data": {}}}})");
    CHECK(testing::has_code(r.diagnostics, "CH001"));
  }
  SUBCASE("default of the wrong type") {
    const auto r = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "Container": {"direct_parents": ["Concept"], "data": {"properties": {"basicShape": "String", "default": {"basicShape": 4}}}}}})");
    REQUIRE(testing::has_code(r.diagnostics, "CH014"));
    const auto ok = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "Container": {"direct_parents": ["Concept"], "data": {"properties": {"basicShape": "String", "default": {"basicShape": "cuboid"}}}}}})");
    CHECK(ok.ok());
  }
  SUBCASE("duplicate keys") {
    const auto r = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "A": {"direct_parents": ["Concept"], "data": {}},
        "A": {"direct_parents": ["Concept"], "data": {}}}})");
    CHECK(testing::has_code(r.diagnostics, "CH005"));
  }
  SUBCASE("syntax errors name the line") {
    const auto r = load_hierarchy_text("{\n  \"concepts\": {\n    \"Concept\": {\"direct_parents\": [] \"data\": {}}\n  }\n}");
    REQUIRE(testing::has_code(r.diagnostics, "CH022"));
    CHECK(r.diagnostics[0].location == "line 3");
  }
  SUBCASE("pointers lead to the offending node") {
    const auto r = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "Box": {"direct_parents": ["Concept"], "data": {"properties": {"side": "Length"}}}}})");
    REQUIRE(testing::has_code(r.diagnostics, "CH006"));
    bool pointed = false;
    for (const auto& d : r.diagnostics) pointed = pointed || d.location.find("/concepts/Box") == 0;
    CHECK(pointed);
  }
  SUBCASE("unknown keys warn, or fail in strict mode") {
    const char* doc = R"({"concepts": {"Concept": {"direct_parents": [], "data": {}, "colour": 1}}})";
    const auto lenient = load_hierarchy_text(doc);
    CHECK(lenient.ok());
    CHECK(testing::has_code(lenient.diagnostics, "CH008"));
    CHECK_FALSE(load_hierarchy_text(doc, LoadOptions{true}).ok());
  }
  SUBCASE("missing direct_parents") {
    const auto r = load_hierarchy_text(R"({"concepts": {
        "Concept": {"direct_parents": [], "data": {}},
        "Loose": {"direct_parents": [], "data": {}}}})");
    CHECK(testing::has_code(r.diagnostics, "CH003"));
  }
}

TEST_CASE("hierarchies survive a serialize and reload round trip") {
  for (const std::string name : {"household.json", "bookshelf.json", "restructure.json"}) {
    CAPTURE(name);
    const auto kb = testing::load_fixture(name);
    const std::string text = serialize_hierarchy(kb.graph).dump(2);
    const auto r = load_hierarchy_text(text);
    REQUIRE(r.ok());
    const auto& a = kb.graph;
    const auto& b = r.kb.graph;
    for (const auto& [x, _] : a.concepts()) {
      REQUIRE(b.has_concept(x));
      CHECK(b.ancestors(x) == a.ancestors(x));
      CHECK(b.concept_node(x).default_values == a.concept_node(x).default_values);
    }
    for (const auto& [fn, def] : kb.functions.defs()) {
      REQUIRE(r.kb.functions.has(fn));
      if (def.procedure) CHECK(*r.kb.functions.def(fn).procedure == *def.procedure);
    }
    for (const auto& [i, rec] : a.instances())
      for (const auto& [p, v] : rec.property_values) {
        const Value w = b.instance(i).property_values.at(p);
        if (v.is(Value::Kind::Location))
          CHECK(near(w.as_location().pose, v.as_location().pose, 1e-12, 1e-12));
        else
          CHECK(w == v);
      }
    CHECK(serialize_hierarchy(b).dump(2) == text);
  }
}

TEST_CASE("trace parsing") {
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK(load_trace(in).empty());
  }
  SUBCASE("seven and eight element poses") {
    std::istringstream in(
        "{\"timestamp\": 0.0, \"entities\": {\"Cup\": [1,0,0,0,1,2,3]}}\n"
        "\n"
        "{\"timestamp\": 0.1, \"entities\": {\"Cup\": [1,0,0,0,1,2,3,0]}, \"hands\": {\"H\": [0,0,1]}, "
        "\"contacts\": [[\"A\", \"B\"]]}\n");
    const auto frames = load_trace(in);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].entity_poses.at("Cup") == frames[1].entity_poses.at("Cup"));
    CHECK_FALSE(frames[0].contacts.has_value());
    REQUIRE(frames[1].contacts.has_value());
    CHECK(frames[1].contacts->at(0) == std::pair<std::string, std::string>{"A", "B"});
  }
  SUBCASE("a short pose array names the entity") {
    std::istringstream in("{\"timestamp\": 0.0, \"entities\": {\"Cup\": [1,0,0,0,1]}}\n");
    try {
      load_trace(in);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("Cup") != std::string::npos);
    }
  }
  SUBCASE("non-increasing timestamps name the line") {
    std::istringstream in("{\"timestamp\": 1.0}\n{\"timestamp\": 0.5}\n");
    try {
      load_trace(in);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("the 600 frame fixture parses in under a second") {
    const auto start = std::chrono::steady_clock::now();
    const auto frames = load_trace_file(testing::fixture("pouring_trace.jsonl"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(frames.size() == 600);
    CHECK(frames.back().timestamp == doctest::Approx(599.0 / 30.0));
    CHECK(secs < 1.0);
  }
}

TEST_CASE("state files decode against the base hierarchy") {
  const auto kb = testing::load_fixture("household.json");
  const auto a = load_state_file(testing::fixture("fig2_state_a.json"), kb.graph);
  CHECK(a.size() == 7);
  CHECK(a.at("MilkBox").property_values.at("content") ==
        Value::sequence("Substance", {Value::entity("MilkPortion")}));
  CHECK_THROWS_AS(load_state_text(R"({"instances": {"X": {"direct_parents": ["Nope"], "data": {}}}})", kb.graph),
                  ValidationError);
}

TEST_CASE("cli exit codes and outputs") {
  const auto household = testing::fixture("household.json");
  SUBCASE("validate") {
    const auto r = cli({"validate", household});
    CHECK(r.status == 0);
    CHECK(r.out == "ok: 39 concepts, 13 instances\n");
    const auto root = scratch("root.json");
    write(root, kRootOnly);
    CHECK(cli({"validate", root.string()}).status == 0);
    const auto bad = scratch("bad.json");
    write(bad, R"({"concepts": {"Concept": {"direct_parents": [], "data": {}}, "A": {"direct_parents": ["A"], "data": {}}}})");
    const auto invalid = cli({"validate", bad.string()});
    CHECK(invalid.status == 1);
    CHECK(invalid.err.find("CH001") != std::string::npos);
    CHECK(cli({"validate", scratch("missing.json").string()}).status == 2);
  }
  SUBCASE("usage errors") {
    const auto r = cli({"validate", household, "--bogus"});
    CHECK(r.status == 2);
    CHECK(r.err.find("validate") != std::string::npos);
    CHECK(cli({}).status == 2);
    CHECK(cli({"recognize", household, testing::fixture("pouring_trace.jsonl"), "--debounce", "0"}).status == 2);
  }
  SUBCASE("affordances") {
    const auto r = cli({"affordances", testing::fixture("birds.json"), "SparrowInstance"});
    CHECK(r.status == 0);
    CHECK(r.out == "Fly a\n");
    CHECK(cli({"affordances", testing::fixture("birds.json"), "PenguinInstance"}).out.empty());
    CHECK(cli({"affordances", testing::fixture("birds.json"), "Dodo"}).status == 2);
  }
  SUBCASE("recognize writes the golden timeline") {
    const auto out = scratch("events.json");
    const auto r = cli({"recognize", household, testing::fixture("pouring_trace.jsonl"), "--out", out.string()});
    CHECK(r.status == 0);
    CHECK(read_file(out.string()) == read_file(testing::fixture("pouring_events.golden.json")));
    const auto lanes = cli({"recognize", household, testing::fixture("pouring_trace.jsonl"), "--out", out.string(), "--lanes"});
    CHECK(lanes.out.find("RightHand:") != std::string::npos);
  }
  SUBCASE("diff prints the four actions") {
    const auto r = cli({"diff", household, testing::fixture("fig2_state_a.json"), testing::fixture("fig2_state_b.json")});
    CHECK(r.status == 0);
    std::istringstream lines(r.out);
    std::vector<std::string> got;
    for (std::string line; std::getline(lines, line);) got.push_back(line);
    REQUIRE(got.size() == 4);
    CHECK(got[0].rfind("ChangeLocation(", 0) == 0);
    CHECK(got[0].find("what=MilkBox") != std::string::npos);
    CHECK(got[1].find("what=GreyBowl") != std::string::npos);
    CHECK(got[2] == "TransferContent(from=CerealBoxInstance, to=WhiteBowl, what=CerealPortion)");
    CHECK(got[3] == "TransferContent(from=MilkBox, to=WhiteBowl, what=MilkPortion)");
  }
  SUBCASE("restructure plans, applies and is deterministic") {
    const auto fixture = testing::fixture("restructure.json");
    const auto plan = scratch("plan.json");
    const auto applied = scratch("applied.json");
    CHECK(cli({"restructure", fixture, "--plan-out", plan.string()}).status == 0);
    CHECK(cli({"restructure", fixture}).out == read_file(plan.string()));
    CHECK(cli({"restructure", fixture, "--apply", plan.string(), "--out", applied.string()}).status == 0);
    CHECK(cli({"validate", applied.string()}).status == 0);
    const auto again = cli({"restructure", applied.string()});
    CHECK(json::parse(again.out)["new_concepts"].empty());
    CHECK(json::parse(again.out)["new_functions"].empty());
    // A plan computed on another graph is refused.
    const auto stale = cli({"restructure", applied.string(), "--apply", plan.string()});
    CHECK(stale.status == 2);
  }
}
