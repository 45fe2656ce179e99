#pragma once

// Schema-checked accessors over nlohmann::json. Every failure names the JSON
// pointer of the offending value.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "radrep/error.hpp"

namespace radrep::jsonutil {

using nlohmann::json;

inline std::string child(const std::string& ptr, std::string_view key) {
    std::string out = ptr + "/";
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

inline std::string child(const std::string& ptr, std::size_t index) { return ptr + "/" + std::to_string(index); }

inline void expect_object(const json& j, const std::string& ptr) {
    if (!j.is_object()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an object");
}

inline void expect_array(const json& j, const std::string& ptr) {
    if (!j.is_array()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an array");
}

inline const json& require(const json& obj, const std::string& ptr, std::string_view key) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) throw SchemaError(child(ptr, key), "missing required field");
    return *it;
}

inline const json* optional_field(const json& obj, std::string_view key) {
    const auto it = obj.find(std::string(key));
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline std::string as_string(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw SchemaError(ptr, "expected a string");
    return j.get<std::string>();
}

inline double as_number(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw SchemaError(ptr, "expected a number");
    return j.get<double>();
}

inline std::int64_t as_int(const json& j, const std::string& ptr) {
    if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
    return j.get<std::int64_t>();
}

inline bool as_bool(const json& j, const std::string& ptr) {
    if (!j.is_boolean()) throw SchemaError(ptr, "expected a boolean");
    return j.get<bool>();
}

inline std::string get_string(const json& obj, const std::string& ptr, std::string_view key) {
    return as_string(require(obj, ptr, key), child(ptr, key));
}
inline double get_number(const json& obj, const std::string& ptr, std::string_view key) {
    return as_number(require(obj, ptr, key), child(ptr, key));
}
inline std::int64_t get_int(const json& obj, const std::string& ptr, std::string_view key) {
    return as_int(require(obj, ptr, key), child(ptr, key));
}
inline bool get_bool(const json& obj, const std::string& ptr, std::string_view key) {
    return as_bool(require(obj, ptr, key), child(ptr, key));
}

inline std::optional<std::string> opt_string(const json& obj, const std::string& ptr, std::string_view key) {
    const json* v = optional_field(obj, key);
    if (!v) return std::nullopt;
    return as_string(*v, child(ptr, key));
}
inline std::optional<double> opt_number(const json& obj, const std::string& ptr, std::string_view key) {
    const json* v = optional_field(obj, key);
    if (!v) return std::nullopt;
    return as_number(*v, child(ptr, key));
}
inline std::optional<bool> opt_bool(const json& obj, const std::string& ptr, std::string_view key) {
    const json* v = optional_field(obj, key);
    if (!v) return std::nullopt;
    return as_bool(*v, child(ptr, key));
}

/// Parses text, mapping syntax errors to ParseError with the byte offset.
inline json parse(std::string_view text, bool allow_comments = false) {
    try {
        return json::parse(text.begin(), text.end(), nullptr, true, allow_comments);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
}

}  // namespace radrep::jsonutil
