#include "gvmt/dataio/checkpoint.h"

#include <set>

#include "gvmt/dataio/binio.h"
#include "gvmt/errors.h"

namespace gvmt::data {

namespace {
constexpr std::string_view kMagic = "GVMTCKPT";
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  BinaryWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  const std::string config = ckpt.config.dump();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double x : t.data()) w.f64(x);
  }
  return w.buffer();
}

Checkpoint parse_checkpoint(std::string bytes, const std::string& source_name) {
  BinaryReader r(std::move(bytes), source_name);
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(source_name + ": checkpoint version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  const std::string config = r.bytes(r.u32());
  try {
    ckpt.config = nlohmann::json::parse(config);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(source_name + ": bad config block: " + e.what());
  }
  const std::size_t n = r.u32();
  std::set<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = r.bytes(r.u32());
    if (!names.insert(name).second) throw DataError(source_name + ": duplicate tensor " + name);
    const std::size_t ndim = r.u32();
    if (ndim == 0 || ndim > 8) throw DataError(source_name + ": tensor " + name + " has ndim " + std::to_string(ndim));
    num::Shape shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw DataError(source_name + ": tensor " + name + " has a zero dimension");
      numel *= d;
    }
    if (numel > r.remaining() / 8) throw DataError(source_name + ": truncated payload of tensor " + name);
    std::vector<double> data(numel);
    for (auto& x : data) x = r.f64();
    ckpt.tensors.push_back({std::move(name), num::Tensor::from_data(std::move(shape), std::move(data))});
  }
  if (!r.at_end()) throw DataError(source_name + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

}  // namespace gvmt::data
