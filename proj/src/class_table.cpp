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
#include "rareseg/class_table.hpp"

#include <set>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

ClassTable::ClassTable(std::vector<ClassInfo> classes, std::uint8_t ignore_id)
    : classes_(std::move(classes)), ignore_id_(ignore_id) {
  Validate();
}

ClassTable ClassTable::Default() {
  return ClassTable({{0, "Background", false},
                     {1, "Water", false},
                     {2, "Building-No-Damage", false},
                     {3, "Building-Minor-Damage", true},
                     {4, "Building-Major-Damage", true},
                     {5, "Building-Total-Destruction", true},
                     {6, "Road-Clear", false},
                     {7, "Road-Blocked", false},
                     {8, "Tree", false},
                     {9, "Pool", false},
                     {10, "Vehicle", false}},
                    kDefaultIgnoreId);
}

std::vector<int> ClassTable::rare_set() const {
  std::vector<int> out;
  for (const auto& c : classes_) {
    if (c.rare) out.push_back(c.id);
  }
  return out;
}

int ClassTable::find(const std::string& name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return c.id;
  }
  return -1;
}

void ClassTable::Validate() const {
  if (classes_.empty()) throw ConfigError("classes", "class list is empty");
  if (classes_.size() > 255) {
    throw ConfigError("classes", "at most 255 classes fit an 8-bit mask");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != static_cast<int>(i)) {
      throw ConfigError("classes[" + std::to_string(i) + "].id",
                        "ids must be contiguous from 0 in order");
    }
    if (!names.insert(classes_[i].name).second) {
      throw ConfigError("classes[" + std::to_string(i) + "].name",
                        "duplicate class name '" + classes_[i].name + "'");
    }
  }
  if (ignore_id_ < classes_.size()) {
    throw ConfigError("ignore_id", "ignore_id collides with a class id");
  }
}

ClassTable ClassTable::FromJson(const nlohmann::json& doc,
                                const std::string& path) {
  json_fields::CheckKeys(doc, path, {"ignore_id", "classes"});
  int ignore = kDefaultIgnoreId;
  json_fields::Read(doc, path, "ignore_id", ignore);
  if (ignore < 0 || ignore > 255) {
    throw ConfigError(path + ".ignore_id", "must fit in 8 bits");
  }
  auto it = doc.find("classes");
  if (it == doc.end() || !it->is_array()) {
    throw ConfigError(path + ".classes", "expected an array of classes");
  }
  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string p = path + ".classes[" + std::to_string(i) + "]";
    const auto& e = (*it)[i];
    json_fields::CheckKeys(e, p, {"id", "name", "rare"});
    ClassInfo info;
    info.id = static_cast<int>(i);
    json_fields::Read(e, p, "id", info.id);
    json_fields::Read(e, p, "name", info.name);
    json_fields::Read(e, p, "rare", info.rare);
    classes.push_back(std::move(info));
  }
  try {
    return ClassTable(std::move(classes), static_cast<std::uint8_t>(ignore));
  } catch (const ConfigError& e) {
    throw ConfigError(path + "." + e.field(), e.message());
  }
}

nlohmann::json ClassTable::ToJson() const {
  nlohmann::json doc;
  doc["ignore_id"] = ignore_id_;
  doc["classes"] = nlohmann::json::array();
  for (const auto& c : classes_) {
    doc["classes"].push_back({{"id", c.id}, {"name", c.name}, {"rare", c.rare}});
  }
  return doc;
}

}  // namespace rareseg
