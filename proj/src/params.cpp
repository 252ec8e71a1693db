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
#include "rareseg/params.hpp"

#include <functional>
#include <numeric>

#include "rareseg/error.hpp"

namespace rareseg {

Tensor Tensor::Zeros(std::vector<int> shape) {
  Tensor t;
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

Tensor& ParameterSet::Add(const std::string& name, std::vector<int> shape) {
  if (index_.contains(name)) {
    throw ValidationError("model", "duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({name, Tensor::Zeros(std::move(shape))});
  return entries_.back().tensor;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ValidationError("model", "unknown parameter '" + name + "'");
  }
  return entries_[it->second].tensor;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ValidationError("model", "unknown parameter '" + name + "'");
  }
  return entries_[it->second].tensor;
}

std::size_t ParameterSet::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

ParameterSet ParameterSet::ZerosLike() const {
  ParameterSet out;
  for (const auto& e : entries_) out.Add(e.name, e.tensor.shape);
  return out;
}

void ParameterSet::SetZero() {
  for (auto& e : entries_) std::fill(e.tensor.data.begin(), e.tensor.data.end(), 0.0);
}

}  // namespace rareseg
