#pragma once

// Minimal structural JSON-Schema checker (type / required / properties /
// items / enum), enough to validate the shipped report schema in tests.

#include <json.hpp>
#include <string>

inline std::string schema_errors(const nlohmann::json& value, const nlohmann::json& schema,
                                 const std::string& path = "$") {
  auto type_ok = [&](const std::string& t) {
    if (t == "object") return value.is_object();
    if (t == "array") return value.is_array();
    if (t == "string") return value.is_string();
    if (t == "integer") return value.is_number_integer();
    if (t == "number") return value.is_number();
    if (t == "boolean") return value.is_boolean();
    if (t == "null") return value.is_null();
    return false;
  };
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_ok(t.get<std::string>());
    } else {
      for (const auto& tt : t) ok = ok || type_ok(tt.get<std::string>());
    }
    if (!ok) return path + ": wrong type";
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& e : schema["enum"]) ok = ok || e == value;
    if (!ok) return path + ": value not in enum";
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"]) {
        if (!value.contains(r.get<std::string>())) {
          return path + ": missing required key " + r.get<std::string>();
        }
      }
    }
    if (schema.contains("properties")) {
      for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
        if (value.contains(it.key())) {
          const std::string err = schema_errors(value[it.key()], it.value(), path + "." + it.key());
          if (!err.empty()) return err;
        }
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const std::string err =
          schema_errors(value[i], schema["items"], path + "[" + std::to_string(i) + "]");
      if (!err.empty()) return err;
    }
  }
  return "";
}
