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
#ifndef RARESEG_ERROR_HPP_
#define RARESEG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rareseg {

// Base for every error raised by the library. `module()` names the subsystem
// that failed so the CLI can print a tagged message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what),
        module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid data: bad label ids, inconsistent dimensions, non-finite values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. `field()` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config", field + ": " + what), field_(field), message_(what) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

}  // namespace rareseg

#endif  // RARESEG_ERROR_HPP_
