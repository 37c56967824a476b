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
#ifndef MPMCLAB_LOGGING_HPP
#define MPMCLAB_LOGGING_HPP

#include <atomic>
#include <string_view>

namespace mpmclab::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

/// Number of warnings emitted since start (counted even when suppressed).
long warning_count();

}  // namespace mpmclab::log

#endif  // MPMCLAB_LOGGING_HPP
