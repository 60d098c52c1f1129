#include "pfgt/model.hpp"

#include <stdexcept>

namespace pfgt {

namespace {
Rng encoder_stream(std::uint64_t seed) { return Rng(seed).substream("init").substream("encoder"); }
Rng prompt_stream(std::uint64_t seed) { return Rng(seed).substream("init").substream("prompts"); }
}  // namespace

Model::Model(const EncoderConfig& config, std::uint64_t seed)
    : config_(config),
      encoder_(config, encoder_stream(seed)),
      pool_(config.num_classes, config.prompt_tokens, config.embed_dim, prompt_stream(seed)) {}

Tensor Model::forward_ids(const Tensor& image, const std::vector<int>& ids,
                          ForwardStats* stats) const {
  return encoder_.forward(image, pool_.blocks_for(ids), stats);
}

Tensor Model::infer_logits(const Tensor& image) const {
  NoGradGuard no_grad;
  return encoder_.forward(image, pool_.blocks_for(pool_.active_ids()));
}

int argmax_lowest(const std::vector<float>& v) {
  if (v.empty()) throw std::invalid_argument("argmax_lowest: empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int Model::predict(const Tensor& image) const { return argmax_lowest(*infer_logits(image).data); }

int Model::predict_active_only(const Tensor& image) const {
  const auto logits = infer_logits(image);
  const auto ids = pool_.active_ids();
  if (ids.empty()) throw std::logic_error("predict_active_only: no active classes");
  int best = ids[0];
  for (int c : ids) {
    if (logits.at(static_cast<std::size_t>(c)) > logits.at(static_cast<std::size_t>(best))) best = c;
  }
  return best;
}

std::vector<Parameter*> Model::parameters() {
  auto out = encoder_.parameters();
  for (auto* p : pool_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Model::trainable_parameters() {
  std::vector<Parameter*> out;
  for (auto* p : parameters()) {
    if (!p->frozen) out.push_back(p);
  }
  return out;
}

}  // namespace pfgt
