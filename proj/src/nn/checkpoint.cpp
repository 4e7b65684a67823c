// SPDX-License-Identifier: Apache-2.0
#include "pfp/nn/checkpoint.hpp"

#include <cstring>

#include "pfp/common/error.hpp"
#include "pfp/common/fsio.hpp"

namespace pfp::nn {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'P', 'R'};
constexpr uint8_t kDtypeF32 = 0;

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& off, const std::filesystem::path& path) {
  if (off + sizeof(T) > buf.size())
    fail("checkpoint.truncated", "{} is truncated at offset {}", path.string(), off);
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
  for (const CheckpointEntry& e : entries)
    if (e.name == name) return e;
  fail("checkpoint.missing_entry", "checkpoint has no entry named {}", name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put<uint32_t>(buf, kCheckpointVersion);
  put<uint32_t>(buf, static_cast<uint32_t>(ckpt.entries.size()));
  for (const CheckpointEntry& e : ckpt.entries) {
    if (e.name.size() > UINT16_MAX) fail("checkpoint.bad_entry", "entry name too long");
    put<uint16_t>(buf, static_cast<uint16_t>(e.name.size()));
    buf.append(e.name);
    put<uint8_t>(buf, kDtypeF32);
    put<uint8_t>(buf, static_cast<uint8_t>(e.shape.size()));
    size_t numel = 1;
    for (uint32_t d : e.shape) {
      put<uint32_t>(buf, d);
      numel *= d;
    }
    if (numel != e.data.size())
      fail("checkpoint.bad_entry", "entry {}: shape product {} vs data size {}", e.name, numel, e.data.size());
    buf.append(reinterpret_cast<const char*>(e.data.data()), 4 * e.data.size());
  }
  std::string meta = ckpt.metadata.dump();
  put<uint32_t>(buf, static_cast<uint32_t>(meta.size()));
  buf.append(meta);
  atomic_write_file(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string buf = read_file(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    fail("checkpoint.bad_magic", "{} is not a checkpoint file", path.string());
  size_t off = 4;
  uint32_t version = take<uint32_t>(buf, off, path);
  if (version != kCheckpointVersion)
    fail("checkpoint.bad_version", "{}: unsupported version {} (expected {})", path.string(), version,
         kCheckpointVersion);
  uint32_t count = take<uint32_t>(buf, off, path);

  Checkpoint ckpt;
  ckpt.entries.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry& e = ckpt.entries[i];
    uint16_t name_len = take<uint16_t>(buf, off, path);
    if (off + name_len > buf.size()) fail("checkpoint.truncated", "{} is truncated in entry name", path.string());
    e.name.assign(buf.data() + off, name_len);
    off += name_len;
    uint8_t dtype = take<uint8_t>(buf, off, path);
    if (dtype != kDtypeF32)
      fail("checkpoint.bad_dtype", "{}: entry {} has unsupported dtype code {}", path.string(), e.name, dtype);
    uint8_t ndim = take<uint8_t>(buf, off, path);
    size_t numel = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      uint32_t dim = take<uint32_t>(buf, off, path);
      e.shape.push_back(dim);
      numel *= dim;
    }
    if (off + 4ull * numel > buf.size())
      fail("checkpoint.truncated", "{} is truncated in entry {}", path.string(), e.name);
    e.data.resize(numel);
    std::memcpy(e.data.data(), buf.data() + off, 4ull * numel);
    off += 4ull * numel;
  }
  uint32_t meta_len = take<uint32_t>(buf, off, path);
  if (off + meta_len > buf.size()) fail("checkpoint.truncated", "{} is truncated in metadata", path.string());
  ckpt.metadata = nlohmann::json::parse(buf.substr(off, meta_len), nullptr, false);
  if (ckpt.metadata.is_discarded())
    fail("checkpoint.bad_metadata", "{}: metadata blob is not valid JSON", path.string());
  off += meta_len;
  if (off != buf.size())
    fail("checkpoint.trailing_bytes", "{} has {} unexpected trailing bytes", path.string(), buf.size() - off);
  return ckpt;
}

}  // namespace pfp::nn
