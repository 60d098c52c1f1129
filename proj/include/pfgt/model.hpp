#pragma once

#include <cstdint>
#include <vector>

#include "pfgt/encoder.hpp"
#include "pfgt/prompt_pool.hpp"

namespace pfgt {

// Encoder plus prompt pool: the complete classifier. Inference assembles all
// active prompt blocks in ascending class order; training chooses its own
// block subsets and orderings.
class Model {
 public:
  Model(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  VisionEncoder& encoder() { return encoder_; }
  const VisionEncoder& encoder() const { return encoder_; }
  PromptPool& pool() { return pool_; }
  const PromptPool& pool() const { return pool_; }

  // Forward with an explicit prompt block id sequence (training path).
  Tensor forward_ids(const Tensor& image, const std::vector<int>& ids,
                     ForwardStats* stats = nullptr) const;

  // Inference logits with every active prompt present, canonical order.
  // Builds no gradient graph.
  Tensor infer_logits(const Tensor& image) const;

  // Full-K argmax; ties break toward the lowest class index.
  int predict(const Tensor& image) const;
  // Argmax restricted to active classes (renormalized-posterior variant).
  int predict_active_only(const Tensor& image) const;

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();

 private:
  EncoderConfig config_;
  VisionEncoder encoder_;
  PromptPool pool_;
};

int argmax_lowest(const std::vector<float>& v);

}  // namespace pfgt
