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
#include "mpmclab/logging.hpp"

#include <iostream>
#include <mutex>

namespace mpmclab::log {
namespace {

std::atomic<int> g_level{static_cast<int>(Level::kInfo)};
std::atomic<long> g_warnings{0};
std::mutex g_mutex;

void emit(Level lv, const char* tag, std::string_view msg) {
  if (static_cast<int>(lv) < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << '[' << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(static_cast<int>(level)); }
Level level() { return static_cast<Level>(g_level.load()); }

void info(std::string_view msg) { emit(Level::kInfo, "info", msg); }
void warn(std::string_view msg) {
  ++g_warnings;
  emit(Level::kWarn, "warn", msg);
}
void error(std::string_view msg) { emit(Level::kError, "error", msg); }

long warning_count() { return g_warnings.load(); }

}  // namespace mpmclab::log
