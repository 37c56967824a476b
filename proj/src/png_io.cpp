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
#include "png_io.hpp"

#include <png.h>

#include <cstring>

#include "mpmclab/common.hpp"

namespace mpmclab::png {

void write(const std::filesystem::path& path, const Raster& raster) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raster.bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw LoadError("cannot write PNG " + path.string() + ": " + msg);
  }
}

Raster read(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::exists(path)) throw LoadError("missing file: " + path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw LoadError("corrupt PNG " + path.string() + ": " + image.message);
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster r;
  r.width = static_cast<int>(image.width);
  r.height = static_cast<int>(image.height);
  r.channels = channels;
  r.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw LoadError("corrupt PNG " + path.string() + ": " + msg);
  }
  return r;
}

}  // namespace mpmclab::png
