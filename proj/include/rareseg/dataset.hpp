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
#ifndef RARESEG_DATASET_HPP_
#define RARESEG_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rareseg/class_table.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

// 8-bit PNG I/O. Images are RGB scaled to [0,1]; masks are single-channel
// with the pixel value taken as the class id.
Image ReadImagePng(const std::filesystem::path& path);
void WriteImagePng(const std::filesystem::path& path, const Image& image);
LabelMask ReadMaskPng(const std::filesystem::path& path);
void WriteMaskPng(const std::filesystem::path& path, const LabelMask& mask);

struct DatasetEntry {
  std::string stem;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
};

// Image/mask pairs of one split, sorted by stem.
struct DatasetIndex {
  std::string split;
  std::vector<DatasetEntry> entries;

  std::size_t size() const { return entries.size(); }
};

// Indexes `<root>/<split>/images/<stem>.png` against
// `<root>/<split>/masks/<stem>.png`. Throws IoError listing every stem that
// lacks a partner.
DatasetIndex load_dataset(const std::filesystem::path& root,
                          const std::string& split);

// Loads one pair and checks that dimensions agree and labels are valid.
std::pair<Image, LabelMask> LoadPair(const DatasetEntry& entry,
                                     const ClassTable& table);

// Throws ValidationError naming the first pixel whose value is neither a
// class id nor the ignore sentinel.
void ValidateMask(const LabelMask& mask, const ClassTable& table,
                  const std::string& source = "mask");

struct FrequencyTable {
  std::vector<std::string> names;
  std::vector<std::uint64_t> counts;
  std::vector<double> percent;

  std::uint64_t total() const;
  // class_id,name,pixel_count,percent
  std::string ToCsv() const;
};

FrequencyTable compute_class_frequencies(const DatasetIndex& index,
                                         const ClassTable& table);
FrequencyTable compute_class_frequencies(std::span<const LabelMask> masks,
                                         const ClassTable& table);

}  // namespace rareseg

#endif  // RARESEG_DATASET_HPP_
