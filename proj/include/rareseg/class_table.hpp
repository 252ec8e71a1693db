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
#ifndef RARESEG_CLASS_TABLE_HPP_
#define RARESEG_CLASS_TABLE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace rareseg {

inline constexpr std::uint8_t kDefaultIgnoreId = 255;

struct ClassInfo {
  int id = 0;
  std::string name;
  bool rare = false;
};

// Ordered class list with an ignore sentinel and the set of underrepresented
// damage classes targeted by the sampler.
class ClassTable {
 public:
  ClassTable() = default;
  ClassTable(std::vector<ClassInfo> classes, std::uint8_t ignore_id);

  // Background, Water, Building-No-Damage, Building-Minor-Damage,
  // Building-Major-Damage, Building-Total-Destruction, Road-Clear,
  // Road-Blocked, Tree, Pool, Vehicle. Minor/Major/Total are rare.
  static ClassTable Default();

  int size() const { return static_cast<int>(classes_.size()); }
  std::uint8_t ignore_id() const { return ignore_id_; }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const std::string& name(int id) const { return classes_.at(id).name; }
  std::vector<int> rare_set() const;
  bool is_rare(int id) const { return classes_.at(id).rare; }
  // Class id by name, or -1.
  int find(const std::string& name) const;

  // {"ignore_id": 255, "classes": [{"id":0,"name":"...","rare":false}, ...]}
  static ClassTable FromJson(const nlohmann::json& doc,
                             const std::string& path = "classes");
  nlohmann::json ToJson() const;

 private:
  void Validate() const;

  std::vector<ClassInfo> classes_;
  std::uint8_t ignore_id_ = kDefaultIgnoreId;
};

}  // namespace rareseg

#endif  // RARESEG_CLASS_TABLE_HPP_
