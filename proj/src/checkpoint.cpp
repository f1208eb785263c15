#include "tocm/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace tocm {

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file '" + path + "'");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

const Tensor* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

CheckpointData snapshot_stores(const std::vector<const ParamStore*>& stores) {
  CheckpointData data;
  for (const ParamStore* store : stores)
    for (const auto& [name, t] : store->items())
      data.entries.emplace_back(name, detach(t));
  std::sort(data.entries.begin(), data.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return data;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  out.write("TOCM", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, uint32_t(data.entries.size()));

  auto sorted = data.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, t] : sorted) {
    put_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    const auto& shape = t.shape();
    put_u32(out, uint32_t(shape.size()));
    for (int d : shape) put_u32(out, uint32_t(d));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              std::streamsize(t.data().size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "TOCM", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  const uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = get_u32(in, path);

  CheckpointData data;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated file '" + path + "'");
    const uint32_t rank = get_u32(in, path);
    std::vector<int> shape;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape.push_back(int(get_u32(in, path)));
      numel *= shape.back();
    }
    std::vector<float> values(static_cast<size_t>(numel));
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 std::streamsize(values.size() * sizeof(float))))
      throw std::runtime_error("checkpoint: truncated file '" + path + "'");
    data.entries.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  return data;
}

void restore_store(ParamStore& store, const CheckpointData& data) {
  for (auto& [name, t] : store.items()) {
    const Tensor* src = data.find(name);
    if (!src) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (src->shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file " +
                               shape_str(src->shape()) + " vs model " + shape_str(t.shape()));
    t.data() = src->data();
  }
}

}  // namespace tocm
