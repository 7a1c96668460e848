#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cbrl/error.hpp"

namespace cbrl::json_util {

using nlohmann::json;

/// Throws InputError naming the first key of `j` not in `allowed`.
inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw InputError(std::string(where) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw InputError("unknown key '" + key + "' in " + std::string(where));
    }
}

/// Reads `key` into `out` when present; type mismatches become InputError.
template <class T>
void read(const json& j, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("invalid value for '") + key + "'");
    }
}

/// Doubles as JSON numbers, with nonfinite values written as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace cbrl::json_util
