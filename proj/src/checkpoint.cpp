#include <cstring>
#include <fstream>

#include "depix/nets.hpp"

namespace depix {

namespace {
constexpr char kMagic[8] = {'D', 'P', 'X', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& config, const std::vector<nn::Param*>& params,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["kind"] = kind;
  header["config"] = config;
  header["meta"] = meta;
  nlohmann::json manifest = nlohmann::json::array();
  uint64_t offset = 0;
  for (const nn::Param* p : params) {
    manifest.push_back({{"name", p->name}, {"shape", p->shape}, {"offset", offset},
                        {"count", p->size()}});
    offset += p->size();
  }
  header["tensors"] = manifest;
  const std::string hs = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // write-temp-then-rename keeps half-written checkpoints invisible
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot open " + tmp);
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const nn::Param* p : params) {
      out.write(reinterpret_cast<const char*>(p->w.data()),
                static_cast<std::streamsize>(p->size() * sizeof(float)));
    }
    if (!out) throw DataError("save_checkpoint: write failed on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("read_checkpoint: " + path.string() + " is not a checkpoint file");
  }
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.config = header.at("config");
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    std::vector<float> data(t.at("count").get<size_t>());
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(data));
  }
  if (!in) throw DataError("read_checkpoint: truncated file " + path.string());
  return ckpt;
}

void load_params(const Checkpoint& ckpt, const std::string& kind, const nlohmann::json& config,
                 std::vector<nn::Param*> params) {
  if (ckpt.kind != kind) {
    throw ConfigError("checkpoint kind mismatch: file holds '" + ckpt.kind + "', expected '" +
                      kind + "'");
  }
  if (ckpt.config != config) {
    throw ConfigError("checkpoint config mismatch: file " + ckpt.config.dump() + " vs net " +
                      config.dump());
  }
  if (ckpt.tensors.size() != params.size()) {
    throw ConfigError("checkpoint tensor count mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, data] = ckpt.tensors[i];
    if (name != params[i]->name || data.size() != params[i]->size()) {
      throw ConfigError("checkpoint tensor '" + name + "' does not match parameter '" +
                        params[i]->name + "'");
    }
    params[i]->w = data;
  }
}

StnNet stn_from_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.kind != "stn") throw ConfigError("expected an stn checkpoint in " + path.string());
  StnNet net(ckpt.config.get<StnNetConfig>(), /*seed=*/0);
  load_params(ckpt, "stn", ckpt.config, net.params());
  return net;
}

DepixNet depix_from_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.kind != "depix") throw ConfigError("expected a depix checkpoint in " + path.string());
  DepixNet net(ckpt.config.get<DepixNetConfig>(), /*seed=*/0);
  load_params(ckpt, "depix", ckpt.config, net.params());
  return net;
}

uint64_t checkpoint_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint_digest: cannot open " + path.string());
  uint64_t hash = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  return hash;
}

}  // namespace depix
