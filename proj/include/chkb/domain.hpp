#pragma once

#include <memory>
#include <string>

namespace chkb {

// A reference to a value domain as written in property declarations and
// function interfaces: "Number", "Location", "Sequence<Object>", "Bowl", ...
class Domain {
public:
  enum class Kind { Any, Number, Boolean, Text, Date, Location, Sequence, Concept };

  Domain() = default;
  static Domain any() { return Domain(Kind::Any); }
  static Domain number() { return Domain(Kind::Number); }
  static Domain boolean() { return Domain(Kind::Boolean); }
  static Domain text() { return Domain(Kind::Text); }
  static Domain date() { return Domain(Kind::Date); }
  static Domain location() { return Domain(Kind::Location); }
  static Domain sequence(Domain element);
  static Domain concept_ref(std::string name);

  // Accepts the primitive names (ValueDomain, Number, Boolean, String/Text, Date,
  // Location), templated sequences (Sequence<..>, List<..>, Set<..>) and treats
  // any other identifier as a concept reference. Throws std::invalid_argument.
  static Domain parse(const std::string& text);

  Kind kind() const { return kind_; }
  const std::string& concept_name() const { return concept_; }
  const Domain& element() const { return *element_; }
  bool is_entity() const { return kind_ == Kind::Concept; }

  std::string to_string() const;
  bool operator==(const Domain& rhs) const { return to_string() == rhs.to_string(); }

private:
  explicit Domain(Kind k) : kind_(k) {}
  Kind kind_ = Kind::Any;
  std::string concept_;
  std::shared_ptr<const Domain> element_;
};

}  // namespace chkb
