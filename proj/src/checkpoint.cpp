#include "xtrl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "xtrl/errors.hpp"

namespace xtrl {

namespace {

constexpr char kMagic[8] = {'X', 'T', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const char* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& data, size_t& off) {
  if (off + sizeof(T) > data.size()) throw ParseError("checkpoint truncated");
  T v;
  std::memcpy(&v, data.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ActorCritic& net) {
  const NetConfig& c = net.net_config();
  std::string payload;
  put<uint32_t>(payload, kVersion);
  for (int v : {c.map_h, c.map_w, c.aux_dim, c.action_dim, c.conv1_filters, c.conv2_filters,
                c.encoder_out, c.trunk_width})
    put<uint32_t>(payload, static_cast<uint32_t>(v));
  auto params = net.parameters();
  put<uint32_t>(payload, static_cast<uint32_t>(params.size()));
  for (const Tensor* t : params) {
    put<uint64_t>(payload, static_cast<uint64_t>(t->size()));
    for (double x : t->v) put<double>(payload, x);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  uint64_t checksum = fnv1a(payload.data(), payload.size());
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

std::unique_ptr<ActorCritic> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) + sizeof(uint64_t) + sizeof(uint32_t))
    throw ParseError("checkpoint truncated");
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("bad checkpoint magic");

  size_t payload_end = data.size() - sizeof(uint64_t);
  uint64_t stored;
  std::memcpy(&stored, data.data() + payload_end, sizeof(stored));
  uint64_t computed = fnv1a(data.data() + sizeof(kMagic), payload_end - sizeof(kMagic));
  if (stored != computed) throw ParseError("checkpoint checksum mismatch");

  size_t off = sizeof(kMagic);
  uint32_t version = take<uint32_t>(data, off);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));

  NetConfig c;
  c.map_h = static_cast<int>(take<uint32_t>(data, off));
  c.map_w = static_cast<int>(take<uint32_t>(data, off));
  c.aux_dim = static_cast<int>(take<uint32_t>(data, off));
  c.action_dim = static_cast<int>(take<uint32_t>(data, off));
  c.conv1_filters = static_cast<int>(take<uint32_t>(data, off));
  c.conv2_filters = static_cast<int>(take<uint32_t>(data, off));
  c.encoder_out = static_cast<int>(take<uint32_t>(data, off));
  c.trunk_width = static_cast<int>(take<uint32_t>(data, off));

  auto net = std::make_unique<ActorCritic>(c, 0);
  auto params = net->parameters();
  uint32_t count = take<uint32_t>(data, off);
  if (count != params.size()) throw ParseError("checkpoint parameter list mismatch");
  for (Tensor* t : params) {
    uint64_t n = take<uint64_t>(data, off);
    if (n != t->size()) throw ParseError("checkpoint tensor size mismatch for " + t->name);
    for (size_t i = 0; i < n; ++i) t->v[i] = take<double>(data, off);
  }
  if (off != payload_end) throw ParseError("checkpoint has trailing bytes");
  return net;
}

}  // namespace xtrl
