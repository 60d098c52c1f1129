#include "pfgt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace pfgt {

using nlohmann::json;

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

json config_to_json(const EncoderConfig& c) {
  return json{{"image_size", c.image_size},   {"patch_size", c.patch_size},
              {"embed_dim", c.embed_dim},     {"depth", c.depth},
              {"heads", c.heads},             {"mlp_ratio", c.mlp_ratio},
              {"num_classes", c.num_classes}, {"prompt_tokens", c.prompt_tokens},
              {"lora_rank", c.lora_rank},     {"lora_scale", c.lora_scale}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.heads = j.at("heads").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<float>();
  c.num_classes = j.at("num_classes").get<int>();
  c.prompt_tokens = j.at("prompt_tokens").get<int>();
  c.lora_rank = j.at("lora_rank").get<int>();
  c.lora_scale = j.at("lora_scale").get<float>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  auto params = const_cast<Model&>(model).parameters();

  json header;
  header["encoder"] = config_to_json(model.config());
  header["prompt_active"] = json::array();
  header["prompt_purged"] = json::array();
  for (int c = 0; c < model.pool().num_classes(); ++c) {
    header["prompt_active"].push_back(model.pool().is_active(c));
    header["prompt_purged"].push_back(model.pool().is_purged(c));
  }

  std::uint64_t offset = 0;
  json plist = json::array();
  for (const Parameter* p : params) {
    json e;
    e["name"] = p->name;
    e["shape"] = p->tensor.shape;
    e["frozen"] = p->frozen;
    e["offset"] = offset;
    plist.push_back(std::move(e));
    offset += p->tensor.numel() * sizeof(float);
  }
  header["params"] = std::move(plist);

  const std::string hs = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write("PFGT", 4);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Parameter* p : params) {
    os.write(reinterpret_cast<const char*>(p->tensor.data->data()),
             static_cast<std::streamsize>(p->tensor.numel() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);

  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PFGT", 4) != 0) {
    throw std::runtime_error("checkpoint: " + path + " is not a PFGT checkpoint (bad magic)");
  }
  const std::uint32_t version = read_u32(is, "format version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t header_len = read_u32(is, "header length");
  std::string hs(header_len, '\0');
  if (!is.read(hs.data(), header_len)) {
    throw std::runtime_error("checkpoint: truncated header in " + path);
  }
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: malformed JSON header in " + path + ": " + e.what());
  }

  const EncoderConfig config = config_from_json(header.at("encoder"));
  auto model = std::make_unique<Model>(config, 0);

  auto params = model->parameters();
  const auto& plist = header.at("params");
  if (plist.size() != params.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch (file " +
                             std::to_string(plist.size()) + ", model " +
                             std::to_string(params.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = plist.at(i);
    if (e.at("name").get<std::string>() != params[i]->name) {
      throw std::runtime_error("checkpoint: parameter name mismatch at index " +
                               std::to_string(i) + ": " + e.at("name").get<std::string>());
    }
    if (e.at("shape").get<std::vector<int>>() != params[i]->tensor.shape) {
      throw std::runtime_error("checkpoint: shape mismatch for " + params[i]->name);
    }
    if (e.at("frozen").get<bool>() != params[i]->frozen) {
      throw std::runtime_error("checkpoint: frozen flag mismatch for " + params[i]->name);
    }
    if (!is.read(reinterpret_cast<char*>(params[i]->tensor.data->data()),
                 static_cast<std::streamsize>(params[i]->tensor.numel() * sizeof(float)))) {
      throw std::runtime_error("checkpoint: truncated data for " + params[i]->name);
    }
  }

  std::vector<bool> active, purged;
  for (const auto& b : header.at("prompt_active")) active.push_back(b.get<bool>());
  for (const auto& b : header.at("prompt_purged")) purged.push_back(b.get<bool>());
  model->pool().set_masks(std::move(active), std::move(purged));
  return model;
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("file_digest: cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace pfgt
