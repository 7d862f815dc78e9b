#pragma once

#include <compare>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chkb/pose.hpp"

namespace chkb {

using json = nlohmann::json;

class Value;

struct Unknown {
  bool operator==(const Unknown&) const = default;
};

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;
  auto operator<=>(const Date&) const = default;

  // Strict ISO "YYYY-MM-DD"; throws std::invalid_argument.
  static Date parse(const std::string& text);
  std::string to_string() const;
};

struct EntityRef {
  std::string name;
  bool operator==(const EntityRef&) const = default;
};

// Pose relative to `reference` (an instance name); empty reference means the origin.
struct Location {
  std::string reference;
  Pose pose;
  bool operator==(const Location&) const = default;
  bool relative_to_origin() const { return reference.empty(); }
};

struct Sequence {
  std::string element_domain;
  std::vector<Value> items;
  bool operator==(const Sequence& rhs) const;
};

class Value {
public:
  enum class Kind { Unknown, Number, Boolean, Text, Date, Sequence, Location, EntityRef };

  Value() = default;

  static Value unknown() { return Value(); }
  static Value number(double v) { return Value(Data(v)); }
  static Value boolean(bool v) { return Value(Data(v)); }
  static Value text(std::string v) { return Value(Data(std::move(v))); }
  static Value date(Date d) { return Value(Data(d)); }
  static Value sequence(std::string element_domain, std::vector<Value> items = {}) {
    return Value(Data(Sequence{std::move(element_domain), std::move(items)}));
  }
  static Value location(Location l) { return Value(Data(std::move(l))); }
  static Value location(std::string reference, Pose pose) {
    return Value(Data(Location{std::move(reference), pose}));
  }
  static Value entity(std::string name) { return Value(Data(EntityRef{std::move(name)})); }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_unknown() const { return kind() == Kind::Unknown; }
  bool is(Kind k) const { return kind() == k; }

  // Checked accessors; throw TypeMismatch naming the actual kind.
  double as_number() const;
  bool as_boolean() const;
  const std::string& as_text() const;
  const Date& as_date() const;
  const Sequence& as_sequence() const;
  const Location& as_location() const;
  const std::string& as_entity() const;

  bool operator==(const Value& rhs) const { return data_ == rhs.data_; }

  // Debug rendering, e.g. `Number(0.3)` or `[Milk, Cereal]`.
  std::string to_string() const;

private:
  using Data = std::variant<Unknown, double, bool, std::string, Date, Sequence, Location, EntityRef>;
  explicit Value(Data d) : data_(std::move(d)) {}
  Data data_;
};

const char* kind_name(Value::Kind k);

// Lossless, deterministic JSON form. Unknown is null, Date is "YYYY-MM-DD",
// Location is {"pose": [8 numbers], "rel": name?}, EntityRef is its name.
json value_to_json(const Value& v);

// Canonical string key (compact JSON) used for sets, hashing and multiset diffs.
std::string value_key(const Value& v);

// Multiset difference of two sequences: elements of `a` not matched in `b`.
std::vector<Value> multiset_minus(const std::vector<Value>& a, const std::vector<Value>& b);
bool multiset_equal(const std::vector<Value>& a, const std::vector<Value>& b);

}  // namespace chkb
