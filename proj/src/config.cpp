#include "pfgt/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace pfgt {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  train.validate();
  if (!data.use_idx) {
    if (data.synthetic.classes != encoder.num_classes) {
      throw std::invalid_argument("config: data.classes must equal encoder.num_classes");
    }
    if (data.synthetic.image_size != encoder.image_size) {
      throw std::invalid_argument("config: data.image_size must equal encoder.image_size");
    }
    if (data.synthetic.samples_per_class < 10) {
      throw std::invalid_argument("config: samples_per_class must be at least 10");
    }
  } else {
    if (data.train_images.empty() || data.train_labels.empty() || data.test_images.empty() ||
        data.test_labels.empty()) {
      throw std::invalid_argument("config: idx mode needs train/test image and label paths");
    }
  }
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j, {"seed", "out_dir", "encoder", "train", "data"}, "top level");
  RunConfig c;
  read_if(j, "seed", c.seed);
  read_if(j, "out_dir", c.out_dir);

  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    reject_unknown_keys(e,
                        {"image_size", "patch_size", "embed_dim", "depth", "heads", "mlp_ratio",
                         "num_classes", "prompt_tokens", "lora_rank", "lora_scale"},
                        "encoder");
    read_if(e, "image_size", c.encoder.image_size);
    read_if(e, "patch_size", c.encoder.patch_size);
    read_if(e, "embed_dim", c.encoder.embed_dim);
    read_if(e, "depth", c.encoder.depth);
    read_if(e, "heads", c.encoder.heads);
    read_if(e, "mlp_ratio", c.encoder.mlp_ratio);
    read_if(e, "num_classes", c.encoder.num_classes);
    read_if(e, "prompt_tokens", c.encoder.prompt_tokens);
    read_if(e, "lora_rank", c.encoder.lora_rank);
    read_if(e, "lora_scale", c.encoder.lora_scale);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown_keys(t,
                        {"lambda", "epochs", "lr", "batch_size", "full_knowledge", "use_kl",
                         "use_shuffle", "use_sampling"},
                        "train");
    read_if(t, "lambda", c.train.lambda);
    read_if(t, "epochs", c.train.epochs);
    read_if(t, "lr", c.train.lr);
    read_if(t, "batch_size", c.train.batch_size);
    read_if(t, "full_knowledge", c.train.full_knowledge);
    read_if(t, "use_kl", c.train.ablation.use_kl);
    read_if(t, "use_shuffle", c.train.ablation.use_shuffle);
    read_if(t, "use_sampling", c.train.ablation.use_sampling);
  }

  // Synthetic data mirrors the encoder geometry unless overridden.
  c.data.synthetic.classes = c.encoder.num_classes;
  c.data.synthetic.image_size = c.encoder.image_size;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown_keys(d, {"synthetic", "idx"}, "data");
    if (d.contains("synthetic") && d.contains("idx")) {
      throw std::invalid_argument("config: choose either synthetic or idx data, not both");
    }
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      reject_unknown_keys(s, {"classes", "samples_per_class", "image_size", "noise_std"},
                          "data.synthetic");
      read_if(s, "classes", c.data.synthetic.classes);
      read_if(s, "samples_per_class", c.data.synthetic.samples_per_class);
      read_if(s, "image_size", c.data.synthetic.image_size);
      read_if(s, "noise_std", c.data.synthetic.noise_std);
    }
    if (d.contains("idx")) {
      const auto& x = d.at("idx");
      reject_unknown_keys(x, {"train_images", "train_labels", "test_images", "test_labels"},
                          "data.idx");
      c.data.use_idx = true;
      read_if(x, "train_images", c.data.train_images);
      read_if(x, "train_labels", c.data.train_labels);
      read_if(x, "test_images", c.data.test_images);
      read_if(x, "test_labels", c.data.test_labels);
    }
  }

  c.train.seed = c.seed;
  c.train.normalize();
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["encoder"] = {{"image_size", c.encoder.image_size},
                  {"patch_size", c.encoder.patch_size},
                  {"embed_dim", c.encoder.embed_dim},
                  {"depth", c.encoder.depth},
                  {"heads", c.encoder.heads},
                  {"mlp_ratio", c.encoder.mlp_ratio},
                  {"num_classes", c.encoder.num_classes},
                  {"prompt_tokens", c.encoder.prompt_tokens},
                  {"lora_rank", c.encoder.lora_rank},
                  {"lora_scale", c.encoder.lora_scale}};
  j["train"] = {{"lambda", c.train.lambda},
                {"epochs", c.train.epochs},
                {"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"full_knowledge", c.train.full_knowledge},
                {"use_kl", c.train.ablation.use_kl},
                {"use_shuffle", c.train.ablation.use_shuffle},
                {"use_sampling", c.train.ablation.use_sampling}};
  if (c.data.use_idx) {
    j["data"] = {{"idx",
                  {{"train_images", c.data.train_images},
                   {"train_labels", c.data.train_labels},
                   {"test_images", c.data.test_images},
                   {"test_labels", c.data.test_labels}}}};
  } else {
    j["data"] = {{"synthetic",
                  {{"classes", c.data.synthetic.classes},
                   {"samples_per_class", c.data.synthetic.samples_per_class},
                   {"image_size", c.data.synthetic.image_size},
                   {"noise_std", c.data.synthetic.noise_std}}}};
  }
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot open " + path + " for writing");
  os << run_config_to_json(c).dump(2) << '\n';
}

SplitDatasets build_datasets(const RunConfig& c) {
  if (!c.data.use_idx) {
    return generate_synthetic(c.data.synthetic, Rng(c.seed).substream("data"));
  }
  SplitDatasets out;
  out.train = load_idx(c.data.train_images, c.data.train_labels);
  out.test = load_idx(c.data.test_images, c.data.test_labels);
  if (out.train.image_size != c.encoder.image_size) {
    throw std::runtime_error("config: idx image size " + std::to_string(out.train.image_size) +
                             " does not match encoder image_size");
  }
  return out;
}

}  // namespace pfgt
