#pragma once

// Validator for the JSON Schema subset used by schemas/*.schema.json:
// $ref (local #/$defs), type, enum, const, properties, required,
// additionalProperties (boolean), items, minItems, maxItems, minimum,
// maximum, oneOf, anyOf. Any other keyword is reported as an error so a
// schema cannot silently rely on something unchecked.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace t3::testing {

class SchemaValidator {
 public:
  explicit SchemaValidator(nlohmann::json root) : root_(std::move(root)) {}

  static SchemaValidator from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema " + path);
    return SchemaValidator(nlohmann::json::parse(in));
  }

  std::vector<std::string> validate(const nlohmann::json& doc) const {
    std::vector<std::string> errors;
    check(root_, doc, "", errors);
    return errors;
  }

 private:
  static bool has_type(const nlohmann::json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "number") return v.is_number();
    if (t == "integer") {
      if (v.is_number_integer()) return true;
      return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
    }
    return false;
  }

  const nlohmann::json& resolve(const std::string& ref) const {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
    return root_.at("$defs").at(ref.substr(prefix.size()));
  }

  void check(const nlohmann::json& s, const nlohmann::json& v, const std::string& at,
             std::vector<std::string>& errors) const {
    const std::string where = at.empty() ? "/" : at;
    auto err = [&](const std::string& m) { errors.push_back(where + ": " + m); };
    for (const auto& [key, rule] : s.items()) {
      if (key == "$schema" || key == "$id" || key == "title" || key == "description" || key == "$defs") continue;
      if (key == "$ref") {
        check(resolve(rule.get<std::string>()), v, at, errors);
      } else if (key == "type") {
        bool ok = false;
        if (rule.is_string()) ok = has_type(v, rule.get<std::string>());
        else
          for (const auto& t : rule) ok = ok || has_type(v, t.get<std::string>());
        if (!ok) err("expected type " + rule.dump() + ", got " + v.type_name());
      } else if (key == "enum") {
        bool ok = false;
        for (const auto& e : rule) ok = ok || e == v;
        if (!ok) err("value " + v.dump() + " not in " + rule.dump());
      } else if (key == "const") {
        if (rule != v) err("expected " + rule.dump() + ", got " + v.dump());
      } else if (key == "properties") {
        if (!v.is_object()) continue;
        for (const auto& [name, sub] : rule.items())
          if (v.contains(name)) check(sub, v.at(name), at + "/" + name, errors);
      } else if (key == "required") {
        if (!v.is_object()) continue;
        for (const auto& name : rule)
          if (!v.contains(name.get<std::string>())) err("missing required property '" + name.get<std::string>() + "'");
      } else if (key == "additionalProperties") {
        if (!v.is_object() || rule.get<bool>()) continue;
        const auto& props = s.contains("properties") ? s.at("properties") : nlohmann::json::object();
        for (const auto& [name, _] : v.items())
          if (!props.contains(name)) err("unexpected property '" + name + "'");
      } else if (key == "items") {
        if (!v.is_array()) continue;
        for (std::size_t i = 0; i < v.size(); ++i) check(rule, v[i], at + "/" + std::to_string(i), errors);
      } else if (key == "minItems") {
        if (v.is_array() && v.size() < rule.get<std::size_t>()) err("fewer than " + rule.dump() + " items");
      } else if (key == "maxItems") {
        if (v.is_array() && v.size() > rule.get<std::size_t>()) err("more than " + rule.dump() + " items");
      } else if (key == "minimum") {
        if (v.is_number() && v.get<double>() < rule.get<double>()) err(v.dump() + " < minimum " + rule.dump());
      } else if (key == "maximum") {
        if (v.is_number() && v.get<double>() > rule.get<double>()) err(v.dump() + " > maximum " + rule.dump());
      } else if (key == "oneOf" || key == "anyOf") {
        std::size_t passing = 0;
        std::vector<std::string> first;
        for (const auto& sub : rule) {
          std::vector<std::string> e;
          check(sub, v, at, e);
          if (e.empty()) ++passing;
          else if (first.empty()) first = e;
        }
        if (passing == 0) err(key + ": no alternative matched (first failure: " + (first.empty() ? "" : first[0]) + ")");
        if (key == "oneOf" && passing > 1) err("oneOf: " + std::to_string(passing) + " alternatives matched");
      } else {
        err("schema uses unsupported keyword '" + key + "'");
      }
    }
  }

  nlohmann::json root_;
};

}  // namespace t3::testing
