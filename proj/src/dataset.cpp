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
#include "rareseg/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "rareseg/error.hpp"

namespace rareseg {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> ReadPng(const fs::path& path, png_uint_32 format,
                                  int& height, int& width) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("datamodel", "cannot read '" + path.string() + "': " +
                                   img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("datamodel", "cannot decode '" + path.string() + "': " + msg);
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buffer;
}

void WritePng(const fs::path& path, png_uint_32 format, int height, int width,
              const std::uint8_t* data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    throw IoError("datamodel", "cannot write '" + path.string() + "': " +
                                   img.message);
  }
}

std::map<std::string, fs::path> PngsByStem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      out.emplace(e.path().stem().string(), e.path());
    }
  }
  return out;
}

}  // namespace

Image ReadImagePng(const fs::path& path) {
  int h = 0, w = 0;
  auto bytes = ReadPng(path, PNG_FORMAT_RGB, h, w);
  Image image(h, w, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    image.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return image;
}

void WriteImagePng(const fs::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) {
    throw ShapeError("datamodel", "PNG export needs 1 or 3 channels, got " +
                                      std::to_string(image.channels));
  }
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 1.0f);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  WritePng(path, image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY,
           image.height, image.width, bytes.data());
}

LabelMask ReadMaskPng(const fs::path& path) {
  int h = 0, w = 0;
  auto bytes = ReadPng(path, PNG_FORMAT_GRAY, h, w);
  LabelMask mask(h, w);
  mask.data = std::move(bytes);
  return mask;
}

void WriteMaskPng(const fs::path& path, const LabelMask& mask) {
  WritePng(path, PNG_FORMAT_GRAY, mask.height, mask.width, mask.data.data());
}

DatasetIndex load_dataset(const fs::path& root, const std::string& split) {
  const fs::path base = root / split;
  if (!fs::is_directory(base / "images")) {
    throw IoError("datamodel", "missing directory '" +
                                   (base / "images").string() + "'");
  }
  auto images = PngsByStem(base / "images");
  auto masks = PngsByStem(base / "masks");
  std::vector<std::string> unmatched;
  DatasetIndex index;
  index.split = split;
  for (const auto& [stem, path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      unmatched.push_back(stem);
      continue;
    }
    index.entries.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : masks) {
    if (!images.contains(stem)) unmatched.push_back(stem);
  }
  if (!unmatched.empty()) {
    std::ostringstream msg;
    msg << "unmatched stems in '" << base.string() << "':";
    for (const auto& s : unmatched) msg << ' ' << s;
    throw IoError("datamodel", msg.str());
  }
  return index;
}

void ValidateMask(const LabelMask& mask, const ClassTable& table,
                  const std::string& source) {
  const int n = table.size();
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const int v = mask.at(y, x);
      if (v >= n && v != table.ignore_id()) {
        throw ValidationError(
            "datamodel", source + ": invalid label " + std::to_string(v) +
                             " at (row " + std::to_string(y) + ", col " +
                             std::to_string(x) + ")");
      }
    }
  }
}

std::pair<Image, LabelMask> LoadPair(const DatasetEntry& entry,
                                     const ClassTable& table) {
  Image image = ReadImagePng(entry.image_path);
  LabelMask mask = ReadMaskPng(entry.mask_path);
  if (image.height != mask.height || image.width != mask.width) {
    throw ValidationError(
        "datamodel", "'" + entry.stem + "': image " +
                         std::to_string(image.height) + "x" +
                         std::to_string(image.width) + " vs mask " +
                         std::to_string(mask.height) + "x" +
                         std::to_string(mask.width));
  }
  ValidateMask(mask, table, entry.mask_path.string());
  return {std::move(image), std::move(mask)};
}

std::uint64_t FrequencyTable::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::string FrequencyTable::ToCsv() const {
  std::ostringstream out;
  out << "class_id,name,pixel_count,percent\n";
  char buf[64];
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%.4f", percent[c]);
    out << c << ',' << names[c] << ',' << counts[c] << ',' << buf << '\n';
  }
  return out.str();
}

namespace {

void Tally(const LabelMask& mask, const ClassTable& table,
           const std::string& source, std::vector<std::uint64_t>& counts) {
  ValidateMask(mask, table, source);
  for (auto v : mask.data) {
    if (v != table.ignore_id()) ++counts[v];
  }
}

FrequencyTable Finish(std::vector<std::uint64_t> counts,
                      const ClassTable& table) {
  FrequencyTable out;
  out.counts = std::move(counts);
  const double total = static_cast<double>(out.total());
  for (int c = 0; c < table.size(); ++c) {
    out.names.push_back(table.name(c));
    out.percent.push_back(total > 0 ? 100.0 * out.counts[c] / total : 0.0);
  }
  return out;
}

}  // namespace

FrequencyTable compute_class_frequencies(const DatasetIndex& index,
                                         const ClassTable& table) {
  std::vector<std::uint64_t> counts(table.size(), 0);
  for (const auto& e : index.entries) {
    Tally(ReadMaskPng(e.mask_path), table, e.mask_path.string(), counts);
  }
  return Finish(std::move(counts), table);
}

FrequencyTable compute_class_frequencies(std::span<const LabelMask> masks,
                                         const ClassTable& table) {
  std::vector<std::uint64_t> counts(table.size(), 0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    Tally(masks[i], table, "mask[" + std::to_string(i) + "]", counts);
  }
  return Finish(std::move(counts), table);
}

}  // namespace rareseg
