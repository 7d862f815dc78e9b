#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chkb {

// Base for every error raised by the knowledge base.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

class LookupError : public Error {
public:
  explicit LookupError(const std::string& id)
      : Error("lookup", "unknown identifier '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

private:
  std::string id_;
};

class DeclarationError : public Error {
public:
  DeclarationError(const std::string& instance, const std::string& property)
      : Error("declaration", "property '" + property + "' is not declared for '" + instance + "'") {}
};

class AmbiguityError : public Error {
public:
  AmbiguityError(const std::string& instance, const std::string& property,
                 std::vector<std::string> concepts)
      : Error("ambiguity", build(instance, property, concepts)), concepts_(std::move(concepts)) {}
  const std::vector<std::string>& concepts() const noexcept { return concepts_; }

private:
  static std::string build(const std::string& instance, const std::string& property,
                           const std::vector<std::string>& concepts) {
    std::string msg = "conflicting defaults for '" + property + "' of '" + instance +
                      "' at equal distance from:";
    for (const auto& c : concepts) msg += " " + c;
    return msg;
  }
  std::vector<std::string> concepts_;
};

class TypeMismatch : public Error {
public:
  explicit TypeMismatch(const std::string& message) : Error("type-mismatch", message) {}
};

class HookError : public Error {
public:
  HookError(const std::string& function, const std::string& message)
      : Error("hook", "hook '" + function + "' failed: " + message), function_(function) {}
  const std::string& function() const noexcept { return function_; }

private:
  std::string function_;
};

// Tags used by EvalError: "unknown-input", "unbound-argument", "type-mismatch",
// "no-definition", "read-only", "domain", "stage".
class EvalError : public Error {
public:
  EvalError(std::string tag, const std::string& message)
      : Error("eval", message), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

private:
  std::string tag_;
};

class DefinitionError : public Error {
public:
  explicit DefinitionError(const std::string& message) : Error("definition", message) {}
};

// A structured load/validation finding. `location` is a JSON pointer into the
// source document, prefixed by the file path when one is known.
struct Diagnostic {
  std::string code;
  std::string node;
  std::string message;
  std::string location;
  bool warning = false;

  std::string to_string() const {
    std::string s = (warning ? "warning " : "error ") + code;
    if (!location.empty()) s += " at " + location;
    if (!node.empty()) s += " [" + node + "]";
    return s + ": " + message;
  }
};

class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics)
      : Error("validation", summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
  static std::string summarize(const std::vector<Diagnostic>& ds) {
    std::string msg = std::to_string(ds.size()) + " validation error(s)";
    for (const auto& d : ds) msg += "\n  " + d.to_string();
    return msg;
  }
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace chkb
