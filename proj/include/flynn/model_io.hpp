#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "flynn/classifier.hpp"
#include "flynn/error.hpp"
#include "flynn/wire.hpp"

namespace flynn {

// Model container, version 1.
//
//   magic   "FLYN"
//   version u16 = 1
//   flags   u8: bit0 = hash kind (0 fly, 1 sim), bit1 = counts mode
//               (0 integer, 1 real)
//   m, d, s, rho   u32 each
//   seed    u64
//   L       u32
//   gamma   length-prefixed exact decimal string
//   labels  L length-prefixed strings
//   counts  integer mode: L*m varints; real mode: L*m f64
//   crc32   u32 over everything above
//
// All integers little-endian. The lifting matrix / projection is never
// stored; it is regenerated from (seed, m, d, s).
inline constexpr std::array<std::uint8_t, 4> kModelMagic = {'F', 'L', 'Y', 'N'};
inline constexpr std::uint16_t kModelVersion = 1;

inline Bytes serialize_model(const FlyNnModel& model) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u16(kModelVersion);
  std::uint8_t flags = 0;
  if (model.hash_config().kind == HashKind::kSim) flags |= 0x01;
  if (!model.has_integer_counts()) flags |= 0x02;
  w.u8(flags);
  const auto& hc = model.hash_config();
  w.u32(hc.m);
  w.u32(hc.d);
  w.u32(hc.s);
  w.u32(hc.rho);
  w.u64(hc.seed);
  w.u32(model.num_classes());
  w.str(model.gamma_text());
  for (const auto& label : model.label_table()) w.str(label);
  if (model.has_integer_counts()) {
    for (std::uint32_t c : model.counts_int().values()) w.varint(c);
  } else {
    for (double c : model.counts_real()) w.f64(c);
  }
  w.u32(crc32(w.bytes()));
  return w.take();
}

inline FlyNnModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kModelMagic.size() + 2 + 4)
    throw DataError("model file: truncated");
  const std::uint32_t stored_crc =
      ByteReader(bytes.subspan(bytes.size() - 4)).u32();
  if (crc32(bytes.first(bytes.size() - 4)) != stored_crc)
    throw DataError("model file: checksum mismatch");

  ByteReader r(bytes.first(bytes.size() - 4));
  for (std::uint8_t expected : kModelMagic)
    if (r.u8() != expected) throw DataError("model file: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kModelVersion)
    throw DataError("model file: unsupported version " +
                    std::to_string(version));
  const std::uint8_t flags = r.u8();
  HashConfig hc;
  hc.kind = (flags & 0x01) ? HashKind::kSim : HashKind::kFly;
  const bool real_counts = (flags & 0x02) != 0;
  hc.m = r.u32();
  hc.d = r.u32();
  hc.s = r.u32();
  hc.rho = r.u32();
  hc.seed = r.u64();
  const std::uint32_t num_classes = r.u32();
  const std::string gamma_text = r.str();
  std::vector<std::string> labels(num_classes);
  for (auto& label : labels) label = r.str();

  const std::size_t entries =
      static_cast<std::size_t>(num_classes) * hc.m;
  if (real_counts) {
    std::vector<double> values(entries);
    for (auto& v : values) v = r.f64();
    if (r.remaining() != 0) throw DataError("model file: trailing bytes");
    return FlyNnModel(hc, gamma_text, std::move(labels), std::move(values),
                      num_classes);
  }
  ClassCounts counts(num_classes, hc.m);
  for (auto& v : counts.values()) {
    const auto c = r.varint();
    if (c > 0xFFFFFFFFull) throw DataError("model file: count overflow");
    v = static_cast<std::uint32_t>(c);
  }
  if (r.remaining() != 0) throw DataError("model file: trailing bytes");
  return FlyNnModel(hc, gamma_text, std::move(labels), std::move(counts));
}

inline void save_model(const FlyNnModel& model, const std::string& path) {
  const Bytes bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("model file: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("model file: write failed for '" + path + "'");
}

inline FlyNnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("model file: cannot open '" + path + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)),
              std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace flynn
