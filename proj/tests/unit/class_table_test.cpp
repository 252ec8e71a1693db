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
#include <gtest/gtest.h>

#include "rareseg/class_table.hpp"
#include "rareseg/error.hpp"

namespace rareseg {
namespace {

TEST(ClassTable, DefaultHasElevenClassesAndDamageRareSet) {
  const ClassTable t = ClassTable::Default();
  EXPECT_EQ(t.size(), 11);
  EXPECT_EQ(t.ignore_id(), 255);
  EXPECT_EQ(t.rare_set(), (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(t.name(0), "Background");
  EXPECT_EQ(t.name(9), "Pool");
  EXPECT_EQ(t.find("Building-Major-Damage"), 4);
  EXPECT_EQ(t.find("Nope"), -1);
}

TEST(ClassTable, JsonRoundTrip) {
  const ClassTable t = ClassTable::Default();
  const ClassTable back = ClassTable::FromJson(t.ToJson());
  EXPECT_EQ(back.ToJson(), t.ToJson());
}

std::string FieldOf(const nlohmann::json& doc) {
  try {
    ClassTable::FromJson(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(ClassTable, RejectsNonContiguousIds) {
  const auto doc = nlohmann::json::parse(
      R"({"classes":[{"id":0,"name":"a"},{"id":2,"name":"b"}]})");
  EXPECT_EQ(FieldOf(doc), "classes.classes[1].id");
}

TEST(ClassTable, RejectsDuplicateNames) {
  const auto doc = nlohmann::json::parse(
      R"({"classes":[{"id":0,"name":"a"},{"id":1,"name":"a"}]})");
  EXPECT_EQ(FieldOf(doc), "classes.classes[1].name");
}

TEST(ClassTable, RejectsIgnoreIdThatIsAClass) {
  const auto doc = nlohmann::json::parse(
      R"({"ignore_id":1,"classes":[{"id":0,"name":"a"},{"id":1,"name":"b"}]})");
  EXPECT_EQ(FieldOf(doc), "classes.ignore_id");
}

TEST(ClassTable, RejectsUnknownKeys) {
  const auto doc = nlohmann::json::parse(
      R"({"classes":[{"id":0,"name":"a","colour":1}]})");
  EXPECT_EQ(FieldOf(doc), "classes.classes[0].colour");
}

}  // namespace
}  // namespace rareseg
