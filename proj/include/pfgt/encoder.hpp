#pragma once

#include <string>
#include <vector>

#include "pfgt/optimizer.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/tensor.hpp"

namespace pfgt {

struct EncoderConfig {
  int image_size = 32;
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  float mlp_ratio = 2.0f;
  int num_classes = 6;
  int prompt_tokens = 2;    // tokens per class prompt block
  int lora_rank = 4;
  float lora_scale = 4.0f;

  int num_patches() const {
    const int side = image_size / patch_size;
    return side * side;
  }
  int patch_dim() const { return patch_size * patch_size; }
  int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
  int head_dim() const { return embed_dim / heads; }

  void validate() const;
};

struct BlockWeights {
  Parameter ln1_gamma, ln1_beta;
  Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter lora_a_q, lora_b_q;  // trainable low-rank factors on the query
  Parameter lora_a_v, lora_b_v;  // and value projections
  Parameter ln2_gamma, ln2_beta;
  Parameter w1, b1, w2, b2;
};

// Frozen backbone parameters plus the trainable LoRA factors and head.
struct EncoderWeights {
  Parameter patch_w, patch_b;
  Parameter cls_token;  // [1, d]
  Parameter pos_embed;  // [1 + num_patches, d]: class token + patch positions
  std::vector<BlockWeights> blocks;
  Parameter final_gamma, final_beta;
  Parameter head_w, head_b;  // trainable K-way readout
};

struct ForwardStats {
  int sequence_length = 0;
  int prompt_blocks = 0;
};

// ViT-style encoder over grayscale images. Prompt token blocks are spliced
// between the class token and the patch tokens; positional embeddings touch
// only the class token and patches, so logits are invariant (up to fp
// reassociation) to prompt block order.
class VisionEncoder {
 public:
  VisionEncoder(EncoderConfig config, Rng init_rng);

  const EncoderConfig& config() const { return config_; }
  EncoderWeights& weights() { return weights_; }
  const EncoderWeights& weights() const { return weights_; }

  // Patch projection without positional terms (exposed for tests).
  Tensor project_patches(const Tensor& image) const;
  // Patch tokens with their positional embeddings added.
  Tensor patch_embed(const Tensor& image) const;

  // Full forward pass: [cls] ++ prompt blocks ++ patches -> K logits.
  // An empty prompt list is a valid pure-backbone forward.
  Tensor forward(const Tensor& image, const std::vector<Tensor>& prompt_blocks,
                 ForwardStats* stats = nullptr) const;

  // Non-destructive LoRA strip: disabled adapters contribute exactly zero,
  // equivalent to forcing every B factor to zero. Idempotent.
  void set_lora_enabled(bool enabled) { lora_enabled_ = enabled; }
  bool lora_enabled() const { return lora_enabled_; }

  // All parameters in canonical checkpoint order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  EncoderConfig config_;
  EncoderWeights weights_;
  bool lora_enabled_ = true;
};

}  // namespace pfgt
