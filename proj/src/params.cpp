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
#include "mpmclab/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mpmclab {

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

bool ParamSet::same_structure(const ParamSet& other) const {
  if (names != other.names || tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].same_shape(other.tensors[i])) return false;
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (std::size_t i = 0; i < tensors.size(); ++i) z.add(names[i], Tensor(tensors[i].shape(), 0.0));
  return z;
}

std::vector<Real> ParamSet::flatten() const {
  std::vector<Real> flat;
  flat.reserve(total_size());
  for (const auto& t : tensors) flat.insert(flat.end(), t.storage().begin(), t.storage().end());
  return flat;
}

void ParamSet::unflatten(std::span<const Real> flat) {
  if (flat.size() != total_size()) throw ContractError("unflatten: size mismatch");
  std::size_t off = 0;
  for (auto& t : tensors) {
    std::copy_n(flat.begin() + off, t.size(), t.storage().begin());
    off += t.size();
  }
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (!same_structure(other)) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].storage() != other.tensors[i].storage()) return false;
  return true;
}

std::vector<ag::Var> bind(const ParamSet& params, bool requires_grad) {
  std::vector<ag::Var> out;
  out.reserve(params.count());
  for (const auto& t : params.tensors) out.push_back(ag::leaf(t, requires_grad));
  return out;
}

ParamSet gradients(const ParamSet& like, const std::vector<ag::Var>& bound) {
  if (bound.size() != like.count()) throw ContractError("gradients: bound size mismatch");
  ParamSet g;
  for (std::size_t i = 0; i < bound.size(); ++i) g.add(like.names[i], bound[i].grad());
  return g;
}

Tensor he_normal(std::vector<int> shape, Rng& rng, Real gain) {
  Tensor t(std::move(shape));
  int fan_in = 1;
  for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.dim(i);
  const Real std = gain * std::sqrt(2.0 / fan_in);
  for (auto& v : t.storage()) v = std * rng.normal();
  return t;
}

void ema_update(ParamSet& teacher, const ParamSet& student, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("ema momentum must satisfy 0 <= m < 1, got " + std::to_string(momentum));
  if (!teacher.same_structure(student)) throw ContractError("ema_update: teacher/student structure mismatch");
  for (std::size_t i = 0; i < teacher.count(); ++i) {
    auto& t = teacher.tensors[i].storage();
    const auto& s = student.tensors[i].storage();
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = momentum * t[k] + (1.0 - momentum) * s[k];
  }
}

namespace {

constexpr char kMagic[8] = {'M', 'P', 'M', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian hosts");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError("truncated checkpoint " + path);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  header["groups"] = nlohmann::json::object();
  for (const auto& [gname, ps] : ckpt.groups) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < ps.count(); ++i) arr.push_back({{"name", ps.names[i]}, {"shape", ps.tensors[i].shape()}});
    header["groups"][gname] = arr;
  }
  const std::string text = header.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw LoadError("cannot write checkpoint " + path.string());
    os.write(kMagic, sizeof kMagic);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [gname, ps] : ckpt.groups)
      for (const auto& t : ps.tensors)
        os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(Real)));
    if (!os) throw LoadError("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw LoadError("not a checkpoint file: " + path.string());
  if (read_pod<std::uint32_t>(is, path.string()) != kVersion)
    throw LoadError("unsupported checkpoint version in " + path.string());
  const auto len = read_pod<std::uint64_t>(is, path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw LoadError("truncated checkpoint " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw LoadError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.meta = header.at("meta");
  // std::map iteration order matches save order.
  for (const auto& [gname, arr] : header.at("groups").items()) {
    ParamSet ps;
    for (const auto& e : arr) {
      Tensor t(e.at("shape").get<std::vector<int>>());
      if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(Real))))
        throw LoadError("truncated tensor " + gname + "/" + e.at("name").get<std::string>() + " in " + path.string());
      ps.add(e.at("name").get<std::string>(), std::move(t));
    }
    ck.groups.emplace(gname, std::move(ps));
  }
  return ck;
}

}  // namespace mpmclab
