#include "chkb/domain.hpp"

#include <cctype>
#include <stdexcept>

namespace chkb {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

}  // namespace

Domain Domain::sequence(Domain element) {
  Domain d(Kind::Sequence);
  d.element_ = std::make_shared<const Domain>(std::move(element));
  return d;
}

Domain Domain::concept_ref(std::string name) {
  Domain d(Kind::Concept);
  d.concept_ = std::move(name);
  return d;
}

Domain Domain::parse(const std::string& raw) {
  const std::string text = trim(raw);
  const auto lt = text.find('<');
  if (lt != std::string::npos) {
    if (text.back() != '>') throw std::invalid_argument("malformed domain '" + raw + "'");
    const std::string head = trim(text.substr(0, lt));
    if (head != "Sequence" && head != "List" && head != "Set")
      throw std::invalid_argument("unsupported templated domain '" + raw + "'");
    return sequence(parse(text.substr(lt + 1, text.size() - lt - 2)));
  }
  if (text == "ValueDomain") return any();
  if (text == "Number" || text == "Real") return number();
  if (text == "Boolean" || text == "Bool") return boolean();
  if (text == "String" || text == "Text") return Domain(Kind::Text);
  if (text == "Date") return date();
  if (text == "Location") return location();
  if (text == "Sequence" || text == "List") return sequence(any());
  if (!identifier(text)) throw std::invalid_argument("malformed domain '" + raw + "'");
  return concept_ref(text);
}

std::string Domain::to_string() const {
  switch (kind_) {
    case Kind::Any: return "ValueDomain";
    case Kind::Number: return "Number";
    case Kind::Boolean: return "Boolean";
    case Kind::Text: return "String";
    case Kind::Date: return "Date";
    case Kind::Location: return "Location";
    case Kind::Sequence: return "Sequence<" + element_->to_string() + ">";
    case Kind::Concept: return concept_;
  }
  return "?";
}

}  // namespace chkb
