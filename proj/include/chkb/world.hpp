#pragma once

#include <optional>
#include <string>

#include "chkb/hierarchy.hpp"
#include "chkb/pose.hpp"

namespace chkb {

// Read-only geometric view of the scene used by spatial builtins.
class World {
public:
  virtual ~World() = default;
  // Origin-frame pose of an instance, if it can be placed.
  virtual std::optional<Pose> global_pose(const std::string& entity) const = 0;
  // The entity's location relative to its current reference.
  virtual std::optional<Location> current_location(const std::string& entity) const = 0;
  virtual bool in_contact(const std::string& a, const std::string& b) const = 0;
  // True iff the object rests on the support surface of another object.
  virtual bool is_supported(const std::string& entity) const = 0;
};

// World derived from the `location` properties stored in a hierarchy. Contact
// and support follow the reference relation: an object is supported by, and in
// contact with, the object its location is expressed against.
class StaticWorld : public World {
public:
  explicit StaticWorld(const Hierarchy& graph) : graph_(graph) {}
  std::optional<Pose> global_pose(const std::string& entity) const override;
  std::optional<Location> current_location(const std::string& entity) const override;
  bool in_contact(const std::string& a, const std::string& b) const override;
  bool is_supported(const std::string& entity) const override;

private:
  const Hierarchy& graph_;
};

// The instance whose `surfaces` list names `surface`, or empty.
std::string surface_owner(const Hierarchy& graph, const std::string& surface);

// Maps a location reference to the entity that anchors it: surfaces resolve to
// their owning object. Empty stays empty (origin).
std::string anchor_of(const Hierarchy& graph, const std::string& reference);

// Origin-frame pose of a location, or nullopt when its reference cannot be placed.
std::optional<Pose> globalize(const World& world, const Location& loc);

}  // namespace chkb
