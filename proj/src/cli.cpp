#include "chkb/cli.hpp"

#include <CLI11.hpp>

#include <fstream>

#include "chkb/diff.hpp"
#include "chkb/io.hpp"
#include "chkb/recognizer.hpp"
#include "chkb/restructurer.hpp"

namespace chkb {

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Loads and reports diagnostics; nullopt when the hierarchy has errors.
std::optional<KnowledgeBase> load(const std::string& path, bool strict, std::ostream& err) {
  LoadResult r = load_hierarchy_file(path, LoadOptions{strict});
  for (const auto& d : r.diagnostics) err << path << ": " << d.to_string() << "\n";
  if (!r.ok()) return std::nullopt;
  return std::move(r.kb);
}

std::string format_action(const ActionInstance& a) {
  std::string s = a.action + "(";
  bool first = true;
  for (const auto& [k, v] : a.params) {
    s += (first ? "" : ", ") + k + "=" + v.to_string();
    first = false;
  }
  return s + ")";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept hierarchy knowledge base: validation, affordances, recognition, diffs, restructuring"};
  app.name("chkb");
  app.require_subcommand(1);
  app.fallthrough();
  bool strict = false;
  app.add_flag("--strict", strict, "Treat unknown keys as errors");

  std::string hierarchy, instance, trace, state_a, state_b, out_path, plan_in, plan_out;
  int debounce = 2;
  size_t history = 30;
  bool lanes = false;

  auto* validate = app.add_subcommand("validate", "Load a hierarchy and report diagnostics");
  validate->add_option("hierarchy", hierarchy)->required();

  auto* affordances_cmd = app.add_subcommand("affordances", "List (definition, parameter) pairs an instance can fill");
  affordances_cmd->add_option("hierarchy", hierarchy)->required();
  affordances_cmd->add_option("instance", instance)->required();

  auto* recognize = app.add_subcommand("recognize", "Recognize skills and actions in a pose trace");
  recognize->add_option("hierarchy", hierarchy)->required();
  recognize->add_option("trace", trace)->required();
  recognize->add_option("--out", out_path, "Write events JSON here instead of stdout");
  recognize->add_option("--debounce", debounce, "Consecutive frames to activate or deactivate a skill")
      ->check(CLI::PositiveNumber);
  recognize->add_option("--history", history, "Frames kept in the history ring")->check(CLI::PositiveNumber);
  recognize->add_flag("--lanes", lanes, "Print a per-gripper summary");

  auto* diff = app.add_subcommand("diff", "Explain the changes between two states as actions");
  diff->add_option("hierarchy", hierarchy)->required();
  diff->add_option("stateA", state_a)->required();
  diff->add_option("stateB", state_b)->required();

  auto* restructure = app.add_subcommand("restructure", "Extract new concepts and functions");
  restructure->add_option("hierarchy", hierarchy)->required();
  auto* apply_opt = restructure->add_option("--apply", plan_in, "Apply a reviewed plan and print the new hierarchy");
  restructure->add_option("--plan-out", plan_out, "Write the plan here instead of stdout")->excludes(apply_opt);
  restructure->add_option("--out", out_path, "With --apply, write the hierarchy here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kRuntime;
  }

  try {
    auto kb = load(hierarchy, strict, err);
    if (!kb) return kInvalid;

    if (validate->parsed()) {
      out << "ok: " << kb->graph.concepts().size() << " concepts, " << kb->graph.instances().size() << " instances\n";
      return kOk;
    }

    if (affordances_cmd->parsed()) {
      if (!kb->graph.has_instance(instance)) {
        err << "unknown instance '" << instance << "'\n";
        return kRuntime;
      }
      for (const auto& [def, param] : affordances(kb->graph, instance, kb->acts))
        out << def << " " << param << "\n";
      return kOk;
    }

    if (recognize->parsed()) {
      const auto frames = load_trace_file(trace);
      Environment env(std::move(*kb), history);
      Recognizer rec(env, RecognizerOptions{debounce});
      for (const auto& f : frames) rec.step(f);
      rec.finish();
      for (const auto& d : env.take_warnings()) err << "warning: " << d.to_string() << "\n";
      for (const auto& d : rec.take_warnings()) err << "warning: " << d.to_string() << "\n";
      const std::string events = export_events(rec.timeline()).dump(2) + "\n";
      if (out_path.empty()) out << events;
      else write_text(out_path, events);
      if (lanes) out << export_lanes(rec.timeline(), env.kb().graph);
      return kOk;
    }

    if (diff->parsed()) {
      const Hierarchy a = make_state(kb->graph, load_state_file(state_a, kb->graph));
      const Hierarchy b = make_state(kb->graph, load_state_file(state_b, kb->graph));
      const DiffResult r = diff_environments(*kb, a, b);
      for (const auto& act : r.actions) out << format_action(act) << "\n";
      for (const auto& c : r.unexplained)
        out << "unexplained: " << c.instance << "." << c.property << " " << c.before.to_string() << " -> "
            << c.after.to_string() << "\n";
      for (const auto& m : r.missing_instances) out << "present in one state only: " << m << "\n";
      return kOk;
    }

    if (restructure->parsed()) {
      if (!plan_in.empty()) {
        const RestructurePlan plan = plan_from_json(json::parse(read_file(plan_in)), kb->graph);
        apply_plan(*kb, plan);
        const std::string doc = serialize_hierarchy(kb->graph).dump(2) + "\n";
        if (out_path.empty()) out << doc;
        else write_text(out_path, doc);
        return kOk;
      }
      const std::string doc = plan_to_json(extract_all(*kb)).dump(2) + "\n";
      if (plan_out.empty()) out << doc;
      else write_text(plan_out, doc);
      return kOk;
    }
  } catch (const ValidationError& e) {
    for (const auto& d : e.diagnostics()) err << d.to_string() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace chkb
