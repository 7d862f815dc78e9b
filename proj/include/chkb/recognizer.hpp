#pragma once

#include <map>
#include <string>
#include <vector>

#include "chkb/acts.hpp"
#include "chkb/environment.hpp"

namespace chkb {

enum class Outcome { Successful, Unsuccessful, Indeterminate };
const char* outcome_name(Outcome o);

struct SkillEvent {
  std::string skill;
  Bindings params;
  double t_start = 0.0;
  double t_end = 0.0;
  Outcome outcome = Outcome::Indeterminate;
  std::vector<ActionInstance> actions;  // nonempty only when successful
  std::vector<std::string> flags;       // "iv_exit", "candidate"
  std::string note;                     // reason for an indeterminate outcome
};

struct ActiveSkill {
  const ActDef* def = nullptr;
  Bindings bindings;
  double t_start = 0.0;
  double last_active = 0.0;
  int misses = 0;
  bool iv_exit = false;
  std::vector<Manipulation> manipulations;
};

struct RecognizerOptions {
  int debounce = 2;        // consecutive frames to activate and to deactivate
  size_t pool_cap = 12;    // entities per gripper per frame
};

// Injective assignments of `agents` to agent parameters and of `agents` plus
// `objects` to entity parameters that satisfy every parameter spec. Value
// parameters are left unbound. Deterministic order.
std::vector<Bindings> generate_parameter_tuples(const Hierarchy& graph, const ActDef& skill,
                                                const std::vector<std::string>& agents,
                                                const std::vector<std::string>& objects);

// Fills value parameters from their extraction functions. Returns false when a
// required parameter cannot be extracted; optional ones stay UNKNOWN.
bool fill_value_params(const FunctionLibrary& functions, const ActDef& skill, Bindings& bindings, EvalContext& ctx);

// Frame-by-frame skill recognition over one environment.
class Recognizer {
public:
  explicit Recognizer(Environment& env, RecognizerOptions options = {});

  // Pushes the frame, then runs bookkeeping, discovery and finalization.
  // Returns the events that ended in this step.
  std::vector<SkillEvent> step(const Frame& frame);
  // Ends every active skill at the end of the trace.
  std::vector<SkillEvent> finish();

  const std::vector<SkillEvent>& timeline() const { return timeline_; }
  const std::vector<ActiveSkill>& active() const { return active_; }
  size_t effects_applied() const { return effects_applied_; }
  std::vector<Diagnostic> take_warnings();

private:
  struct Pending {
    int count = 0;
    double start = 0.0;
    size_t last_frame = 0;
  };

  SkillEvent finalize(const ActiveSkill& s);
  void release(const ActiveSkill& s);
  void discover(double t);
  std::vector<std::string> pool_for(const std::string& gripper, std::vector<std::string>& agents);

  Environment& env_;
  RecognizerOptions options_;
  std::vector<ActiveSkill> active_;
  std::vector<SkillEvent> timeline_;
  std::map<std::string, Pending> pending_;
  std::set<std::string> indeterminate_seen_;
  size_t frame_index_ = 0;
  size_t effects_applied_ = 0;
  std::vector<Diagnostic> warnings_;
  std::set<std::string> capped_;
};

// {skill, params, t_start, t_end, outcome, actions:[{action, params}]} per event.
json export_events(const std::vector<SkillEvent>& events);
// One text line per gripper listing its events in time order.
std::string export_lanes(const std::vector<SkillEvent>& events, const Hierarchy& graph);

json bindings_to_json(const Bindings& b);

}  // namespace chkb
