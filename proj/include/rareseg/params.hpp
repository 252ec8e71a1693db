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
#ifndef RARESEG_PARAMS_HPP_
#define RARESEG_PARAMS_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace rareseg {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor Zeros(std::vector<int> shape);
  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;
};

// Named weight arrays in insertion order. Iteration order is part of the
// contract: optimizers, checkpoints and gradient buffers all rely on it.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  // Throws if the name already exists.
  Tensor& Add(const std::string& name, std::vector<int> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t ParameterCount() const;

  // Same names and shapes, all zeros.
  ParameterSet ZerosLike() const;
  void SetZero();

  bool operator==(const ParameterSet& other) const {
    return entries_.size() == other.entries_.size() && [&] {
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != other.entries_[i].name ||
            !(entries_[i].tensor == other.entries_[i].tensor)) {
          return false;
        }
      }
      return true;
    }();
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace rareseg

#endif  // RARESEG_PARAMS_HPP_
