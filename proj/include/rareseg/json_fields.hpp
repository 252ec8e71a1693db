/* Copyright 2026 The rareseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef RARESEG_JSON_FIELDS_HPP_
#define RARESEG_JSON_FIELDS_HPP_

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rareseg/error.hpp"

namespace rareseg::json_fields {

// Helpers for reading config sections strictly: unknown keys and type
// mismatches raise ConfigError carrying the dotted field path.

inline void RequireObject(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void CheckKeys(const nlohmann::json& j, const std::string& path,
                      std::initializer_list<std::string_view> known) {
  RequireObject(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError(path + "." + it.key(), "unknown key");
    }
  }
}

// Reads j[key] into `out` if present; leaves `out` untouched otherwise.
template <class T>
void Read(const nlohmann::json& j, const std::string& path, const char* key,
          T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + "." + key, std::string("wrong type: ") + e.what());
  }
}

}  // namespace rareseg::json_fields

#endif  // RARESEG_JSON_FIELDS_HPP_
