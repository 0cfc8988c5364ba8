/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "moctrans/binary_io.hpp"
#include "moctrans/synthdata/volume.hpp"

namespace moct::data {
namespace {

constexpr std::string_view kMagic = "MVOL1";
constexpr std::uint8_t kFloat = 0;
constexpr std::uint8_t kLabel = 1;

template <typename V>
void header(io::ByteWriter& w, const Grid3<V>& v, std::uint8_t dtype) {
  if (v.values.size() != static_cast<std::size_t>(v.depth) * v.height * v.width)
    throw ShapeError("mvol: payload does not match dims");
  w.text(kMagic);
  w.u8(dtype);
  w.u32(static_cast<std::uint32_t>(v.depth));
  w.u32(static_cast<std::uint32_t>(v.height));
  w.u32(static_cast<std::uint32_t>(v.width));
  w.f32(v.spacing.z);
  w.f32(v.spacing.y);
  w.f32(v.spacing.x);
}

template <typename V>
Grid3<V> decode(const std::vector<std::uint8_t>& bytes, const std::string& source, std::uint8_t want) {
  io::ByteReader r(bytes, source);
  if (r.text(kMagic.size(), "magic") != kMagic) throw DataError(source + ": bad magic (expected MVOL1)");
  const std::uint8_t dtype = r.u8("dtype");
  if (dtype != kFloat && dtype != kLabel) throw DataError(source + ": unknown dtype code " + std::to_string(dtype));
  if (dtype != want)
    throw DataError(source + ": dtype " + std::to_string(dtype) + " where " + std::to_string(want) + " was expected");
  Grid3<V> v;
  v.depth = static_cast<int>(r.u32("depth"));
  v.height = static_cast<int>(r.u32("height"));
  v.width = static_cast<int>(r.u32("width"));
  v.spacing.z = r.f32("spacing");
  v.spacing.y = r.f32("spacing");
  v.spacing.x = r.f32("spacing");
  const std::size_t count = static_cast<std::size_t>(v.depth) * v.height * v.width;
  const std::size_t expected = count * sizeof(V);
  if (r.remaining() != expected)
    throw DataError(source + ": payload has " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(expected));
  v.values.resize(count);
  if constexpr (sizeof(V) == 1) {
    std::memcpy(v.values.data(), r.cursor(), count);
  } else {
    for (auto& x : v.values) x = r.f32("payload");
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_mvol(const Volume& v) {
  io::ByteWriter w;
  header(w, v, kFloat);
  for (float x : v.values) w.f32(x);
  return w.buffer();
}

std::vector<std::uint8_t> encode_mvol(const LabelVolume& v) {
  io::ByteWriter w;
  header(w, v, kLabel);
  w.bytes(v.values.data(), v.values.size());
  return w.buffer();
}

Volume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  return decode<float>(bytes, source, kFloat);
}

LabelVolume decode_labels(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  return decode<std::uint8_t>(bytes, source, kLabel);
}

void write_mvol(const std::string& path, const Volume& v) { io::write_file(path, encode_mvol(v)); }
void write_mvol(const std::string& path, const LabelVolume& v) { io::write_file(path, encode_mvol(v)); }
Volume read_volume(const std::string& path) { return decode_volume(io::read_file(path), path); }
LabelVolume read_labels(const std::string& path) { return decode_labels(io::read_file(path), path); }

}  // namespace moct::data
