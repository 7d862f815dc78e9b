#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chkb/knowledge_base.hpp"
#include "chkb/world.hpp"

namespace chkb {

struct Frame {
  double timestamp = 0.0;
  std::map<std::string, Pose> entity_poses;             // origin frame
  std::map<std::string, Eigen::Vector3d> hand_positions;
  std::optional<std::vector<std::pair<std::string, std::string>>> contacts;  // surface or entity names
};

// Parent-relative poses; an empty parent is the origin.
struct LocationGraph {
  struct Node {
    std::string parent;
    Pose relative;
  };
  std::map<std::string, Node> nodes;

  // Composes relative poses up to the origin; nullopt on a cycle or dangling parent.
  std::optional<Pose> global(const std::string& entity) const;
  bool is_forest() const;
  // Names ordered so that every parent precedes its children; cyclic nodes are omitted.
  std::vector<std::string> topological_order() const;
};

struct ContactRules {
  double surface_distance = 0.005;   // meters between surface centers
  double normal_tolerance_deg = 15.0;
  double gripper_distance = 0.05;    // hand to object origin, when the trace has no contacts
};

// The world model of one trace. Owns a copy of the knowledge base so effects
// applied during recognition do not leak into the caller's hierarchy.
class Environment : public World {
public:
  explicit Environment(KnowledgeBase kb, size_t history = 30, ContactRules rules = {});

  // Throws std::invalid_argument when the timestamp does not increase.
  void push_frame(const Frame& frame);

  KnowledgeBase& kb() { return kb_; }
  const KnowledgeBase& kb() const { return kb_; }
  const LocationGraph& location_graph() const { return graph_; }
  const std::deque<Frame>& history() const { return history_; }
  size_t history_capacity() const { return capacity_; }
  std::optional<double> time() const;

  // World interface over the current frame.
  std::optional<Pose> global_pose(const std::string& entity) const override;
  std::optional<Location> current_location(const std::string& entity) const override;
  bool in_contact(const std::string& a, const std::string& b) const override;
  bool is_supported(const std::string& entity) const override;

  // Closed-ball test on the sum of both interaction volumes. Throws
  // EvalError("unknown-input") when a radius or position is unknown.
  bool in_interaction_volume(const std::string& gripper, const std::string& object) const;

  std::vector<std::string> agents() const;
  std::vector<std::string> grippers_of(const std::string& agent) const;
  std::string agent_of(const std::string& gripper) const;
  bool is_a(const std::string& instance, const std::string& concept_name) const;

  const std::set<std::string>& iv_objects(const std::string& gripper) const;
  const std::set<std::string>& entered_iv(const std::string& gripper) const;
  const std::set<std::string>& departed_iv(const std::string& gripper) const;

  // Grippers currently touching `object`, and auxiliary ones beyond the first.
  std::vector<std::string> gripper_contacts(const std::string& object) const;

  // Bookkeeping maintained by the recognizer.
  std::map<std::string, std::set<std::string>> grasped_by;  // object -> grippers

  std::vector<Diagnostic> take_warnings();

private:
  void build_initial_graph();
  void compute_contacts(const Frame& frame, const std::map<std::string, Pose>& provisional);
  void update_interaction_volumes();
  std::string owner_or_self(const std::string& name) const;
  std::optional<double> interaction_radius(const std::string& instance) const;
  void warn(const std::string& node, const std::string& message);

  KnowledgeBase kb_;
  size_t capacity_;
  ContactRules rules_;
  LocationGraph graph_;
  std::map<std::string, Pose> globals_;
  std::deque<Frame> history_;

  std::set<std::pair<std::string, std::string>> contacts_;     // unordered entity pairs, stored sorted
  std::map<std::string, std::vector<std::string>> supports_;    // object -> supporting objects
  std::map<std::string, std::set<std::string>> iv_, entered_, departed_;
  std::vector<std::string> agents_, grippers_, objects_;
  std::vector<Diagnostic> warnings_;
  std::set<std::string> warned_;
};

// Surface patch of an instance in its owner's frame.
struct SurfacePatch {
  std::string name;
  std::string owner;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// Surfaces listed by `owner`, with geometry from the surface instance (or its
// nearest concept) when present.
std::vector<SurfacePatch> surfaces_of(const Hierarchy& graph, const std::string& owner);

}  // namespace chkb
