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
#ifndef MPMCLAB_SRC_PNG_IO_HPP
#define MPMCLAB_SRC_PNG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mpmclab::png {

struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> bytes;
};

/// Throws LoadError on I/O failure.
void write(const std::filesystem::path& path, const Raster& raster);
/// Reads into the requested channel count; throws LoadError naming the path.
Raster read(const std::filesystem::path& path, int channels);

}  // namespace mpmclab::png

#endif  // MPMCLAB_SRC_PNG_IO_HPP
