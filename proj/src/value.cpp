#include "chkb/value.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "chkb/errors.hpp"

namespace chkb {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : days[m - 1];
}

[[noreturn]] void mismatch(Value::Kind want, Value::Kind got) {
  throw TypeMismatch(std::string("expected ") + kind_name(want) + ", got " + kind_name(got));
}

}  // namespace

Date Date::parse(const std::string& text) {
  Date d;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(text);
  if (text.size() != 10 || !(in >> d.year >> dash1 >> d.month >> dash2 >> d.day) || dash1 != '-' ||
      dash2 != '-')
    throw std::invalid_argument("malformed date '" + text + "'");
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    throw std::invalid_argument("date out of range '" + text + "'");
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

bool Sequence::operator==(const Sequence& rhs) const {
  return element_domain == rhs.element_domain && items == rhs.items;
}

const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::Unknown: return "Unknown";
    case Value::Kind::Number: return "Number";
    case Value::Kind::Boolean: return "Boolean";
    case Value::Kind::Text: return "Text";
    case Value::Kind::Date: return "Date";
    case Value::Kind::Sequence: return "Sequence";
    case Value::Kind::Location: return "Location";
    case Value::Kind::EntityRef: return "EntityRef";
  }
  return "?";
}

double Value::as_number() const {
  if (auto p = std::get_if<double>(&data_)) return *p;
  mismatch(Kind::Number, kind());
}

bool Value::as_boolean() const {
  if (auto p = std::get_if<bool>(&data_)) return *p;
  mismatch(Kind::Boolean, kind());
}

const std::string& Value::as_text() const {
  if (auto p = std::get_if<std::string>(&data_)) return *p;
  mismatch(Kind::Text, kind());
}

const Date& Value::as_date() const {
  if (auto p = std::get_if<Date>(&data_)) return *p;
  mismatch(Kind::Date, kind());
}

const Sequence& Value::as_sequence() const {
  if (auto p = std::get_if<Sequence>(&data_)) return *p;
  mismatch(Kind::Sequence, kind());
}

const Location& Value::as_location() const {
  if (auto p = std::get_if<Location>(&data_)) return *p;
  mismatch(Kind::Location, kind());
}

const std::string& Value::as_entity() const {
  if (auto p = std::get_if<EntityRef>(&data_)) return p->name;
  mismatch(Kind::EntityRef, kind());
}

std::string Value::to_string() const {
  switch (kind()) {
    case Kind::Unknown: return "UNKNOWN";
    case Kind::Number: {
      std::ostringstream os;
      os << as_number();
      return os.str();
    }
    case Kind::Boolean: return as_boolean() ? "true" : "false";
    case Kind::Text: return "\"" + as_text() + "\"";
    case Kind::Date: return as_date().to_string();
    case Kind::Sequence: {
      std::string s = "[";
      const auto& items = as_sequence().items;
      for (size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + items[i].to_string();
      return s + "]";
    }
    case Kind::Location: {
      const auto& l = as_location();
      const auto& t = l.pose.translation;
      std::ostringstream os;
      os << "Location(" << (l.reference.empty() ? "origin" : l.reference) << ": " << t.x() << ", "
         << t.y() << ", " << t.z() << ")";
      return os.str();
    }
    case Kind::EntityRef: return as_entity();
  }
  return "?";
}

json value_to_json(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Unknown: return nullptr;
    case Value::Kind::Number: return v.as_number();
    case Value::Kind::Boolean: return v.as_boolean();
    case Value::Kind::Text: return v.as_text();
    case Value::Kind::Date: return v.as_date().to_string();
    case Value::Kind::Sequence: {
      json arr = json::array();
      for (const auto& item : v.as_sequence().items) arr.push_back(value_to_json(item));
      return arr;
    }
    case Value::Kind::Location: {
      const auto& l = v.as_location();
      json out = json::object();
      out["pose"] = l.pose.to_array();
      if (!l.reference.empty()) out["rel"] = l.reference;
      return out;
    }
    case Value::Kind::EntityRef: return v.as_entity();
  }
  return nullptr;
}

std::string value_key(const Value& v) {
  // Kind prefix keeps Text("Milk") and EntityRef(Milk) apart.
  return std::string(kind_name(v.kind())) + ":" + value_to_json(v).dump();
}

std::vector<Value> multiset_minus(const std::vector<Value>& a, const std::vector<Value>& b) {
  std::map<std::string, int> counts;
  for (const auto& x : b) ++counts[value_key(x)];
  std::vector<Value> out;
  for (const auto& x : a) {
    auto it = counts.find(value_key(x));
    if (it != counts.end() && it->second > 0)
      --it->second;
    else
      out.push_back(x);
  }
  return out;
}

bool multiset_equal(const std::vector<Value>& a, const std::vector<Value>& b) {
  return a.size() == b.size() && multiset_minus(a, b).empty();
}

}  // namespace chkb
