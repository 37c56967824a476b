/* Copyright 2026 The MPMC Lab Authors. All Rights Reserved.

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
#ifndef MPMCLAB_COMMON_HPP
#define MPMCLAB_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpmclab {

using Real = double;

/// Label value excluded from every loss and metric.
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Largest class count supported by the toy pipeline.
inline constexpr int kMaxClasses = 32;

/// Raised for invalid user-facing configuration (bad spec values, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an API precondition on shapes or indices is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a file on disk cannot be read or fails validation.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a training loss component becomes non-finite.
class TrainingAbort : public std::runtime_error {
 public:
  TrainingAbort(std::string component, const std::string& what)
      : std::runtime_error(what), component_(std::move(component)) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

}  // namespace mpmclab

#endif  // MPMCLAB_COMMON_HPP
