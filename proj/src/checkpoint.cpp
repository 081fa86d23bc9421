#include "nhl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace nhl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'N', 'H', 'L', 'X'};
constexpr std::uint32_t kVersion = 1;

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, u32 = 2, i64 = 3 };

void put_u16(std::string& out, std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

void put_record(std::string& out, const std::string& name, Dtype dtype,
                const std::vector<long long>& dims, const void* payload, size_t payload_bytes) {
  if (name.size() > 0xffff) {
    throw ValidationError("MalformedDocument", "tensor name too long: " + name);
  }
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(dims.size()));
  for (long long d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  out.append(reinterpret_cast<const char*>(payload), payload_bytes);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  const std::uint8_t* take(size_t n) {
    if (pos + n > bytes.size()) {
      throw ValidationError("TruncatedFile", "checkpoint record cut short");
    }
    const std::uint8_t* p = bytes.data() + pos;
    pos += n;
    return p;
  }
  std::uint16_t u16() {
    std::uint16_t v;
    std::memcpy(&v, take(2), 2);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }
};

}  // namespace

Checkpoint make_checkpoint(const ComputeGraph& g, ParameterStore<float> store, std::uint32_t epoch) {
  Checkpoint ck;
  ck.version = kVersion;
  ck.graph_hash = g.hash();
  ck.epoch = epoch;
  ck.store = std::move(store);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ck.version);
  out.append(reinterpret_cast<const char*>(ck.graph_hash.data()), ck.graph_hash.size());

  // One sorted record stream: parameter tensors by name, optimizer slots
  // under "opt.", scalars and normalization constants under "__".
  std::map<std::string, std::pair<Dtype, const Tensor<float>*>> records;
  for (const auto& [name, t] : ck.store.tensors) records.emplace(name, std::make_pair(Dtype::f32, &t));
  for (const auto& [name, t] : ck.store.opt_state) {
    records.emplace("opt." + name, std::make_pair(Dtype::f32, &t));
  }
  Tensor<float> norm_mean, norm_std;
  if (!ck.store.norm_mean.empty()) {
    norm_mean = Tensor<float>({static_cast<long long>(ck.store.norm_mean.size())});
    norm_mean.data = std::vector<float>(ck.store.norm_mean.begin(), ck.store.norm_mean.end());
    norm_std = Tensor<float>({static_cast<long long>(ck.store.norm_std.size())});
    norm_std.data = std::vector<float>(ck.store.norm_std.begin(), ck.store.norm_std.end());
    records.emplace("__norm.mean", std::make_pair(Dtype::f32, &norm_mean));
    records.emplace("__norm.std", std::make_pair(Dtype::f32, &norm_std));
  }

  const std::uint32_t epoch = ck.epoch;
  const std::int64_t step = ck.store.step;
  put_record(out, "__epoch", Dtype::u32, {1}, &epoch, sizeof(epoch));
  put_record(out, "__step", Dtype::i64, {1}, &step, sizeof(step));
  for (const auto& [name, rec] : records) {
    put_record(out, name, rec.first, rec.second->dims, rec.second->data.data(),
               rec.second->data.size() * sizeof(float));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f.write(out.data(), static_cast<long>(out.size()))) {
    throw IoError("WriteFailed", "cannot write checkpoint " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("FileOpenFailed", "cannot open checkpoint " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{bytes};

  if (bytes.size() < 4 + 4 + 32 || std::memcmp(r.take(4), kMagic, 4) != 0) {
    throw ValidationError("BadMagic", path.string() + " is not an NHLX checkpoint");
  }
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != kVersion) {
    throw ValidationError("VersionUnsupported", "checkpoint version " + std::to_string(ck.version));
  }
  std::memcpy(ck.graph_hash.data(), r.take(32), 32);

  while (!r.eof()) {
    const std::uint16_t name_len = r.u16();
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    const std::uint8_t dtype = *r.take(1);
    const std::uint8_t ndim = *r.take(1);
    std::vector<long long> dims(ndim);
    long long numel = 1;
    for (int i = 0; i < ndim; ++i) {
      dims[static_cast<size_t>(i)] = r.u32();
      numel *= dims[static_cast<size_t>(i)];
    }
    switch (static_cast<Dtype>(dtype)) {
      case Dtype::u32: {
        if (name == "__epoch" && numel == 1) {
          std::memcpy(&ck.epoch, r.take(4), 4);
        } else {
          r.take(static_cast<size_t>(numel) * 4);
        }
        break;
      }
      case Dtype::i64: {
        if (name == "__step" && numel == 1) {
          std::int64_t step;
          std::memcpy(&step, r.take(8), 8);
          ck.store.step = step;
        } else {
          r.take(static_cast<size_t>(numel) * 8);
        }
        break;
      }
      case Dtype::f32: {
        Tensor<float> t;
        t.dims = std::move(dims);
        t.data.resize(static_cast<size_t>(numel));
        std::memcpy(t.data.data(), r.take(static_cast<size_t>(numel) * 4), static_cast<size_t>(numel) * 4);
        if (name == "__norm.mean") {
          ck.store.norm_mean.assign(t.data.begin(), t.data.end());
        } else if (name == "__norm.std") {
          ck.store.norm_std.assign(t.data.begin(), t.data.end());
        } else if (name.rfind("opt.", 0) == 0) {
          ck.store.opt_state.emplace(name.substr(4), std::move(t));
        } else {
          ck.store.tensors.emplace(std::move(name), std::move(t));
        }
        break;
      }
      case Dtype::f64:
        r.take(static_cast<size_t>(numel) * 8);
        break;
      default:
        throw ValidationError("MalformedDocument", "unknown dtype code " + std::to_string(int(dtype)) +
                                                       " for tensor \"" + name + "\"");
    }
  }
  return ck;
}

void require_graph_match(const Checkpoint& ck, const ComputeGraph& g, bool force) {
  if (force) return;
  if (ck.graph_hash != g.hash()) {
    throw ValidationError("HashMismatch",
                          "checkpoint was written for a different graph (use --force to override)");
  }
}

}  // namespace nhl
