#include "pfgt/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "pfgt/ops.hpp"

namespace pfgt {

void EncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || embed_dim <= 0 || depth <= 0 || heads <= 0 ||
      num_classes <= 0 || prompt_tokens <= 0) {
    throw std::invalid_argument("EncoderConfig: dimensions must be positive");
  }
  if (image_size % patch_size != 0) {
    throw std::invalid_argument("EncoderConfig: image_size must be divisible by patch_size");
  }
  if (embed_dim % heads != 0) {
    throw std::invalid_argument("EncoderConfig: embed_dim must be divisible by heads");
  }
  if (lora_rank < 1 || lora_rank > embed_dim) {
    throw std::invalid_argument("EncoderConfig: lora_rank must be in [1, embed_dim]");
  }
  if (lora_scale <= 0.0f || mlp_ratio <= 0.0f) {
    throw std::invalid_argument("EncoderConfig: lora_scale and mlp_ratio must be positive");
  }
}

namespace {

Tensor trunc_normal(std::vector<int> shape, Rng& rng, float std_dev = 0.02f) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : *t.data) v = static_cast<float>(rng.truncated_normal(0.0, std_dev, 2.0));
  return t;
}

Parameter frozen(Tensor t, std::string name) { return Parameter(std::move(t), std::move(name), true); }
Parameter trainable(Tensor t, std::string name) { return Parameter(std::move(t), std::move(name), false); }

Tensor ones(std::vector<int> shape) {
  auto t = Tensor::zeros(std::move(shape));
  std::fill(t.data->begin(), t.data->end(), 1.0f);
  return t;
}

// x W + b, optionally plus the scaled low-rank delta (s/r) (x A) B.
Tensor lora_linear(const Tensor& x, const Parameter& w, const Parameter& b, const Parameter& a,
                   const Parameter& bb, float scale, bool enabled) {
  Tensor base = ops::matmul(x, w.tensor);
  if (enabled) {
    base = ops::add(base, ops::scale(ops::matmul(ops::matmul(x, a.tensor), bb.tensor), scale));
  }
  return ops::add_rowvec(base, b.tensor);
}

Tensor linear(const Tensor& x, const Parameter& w, const Parameter& b) {
  return ops::add_rowvec(ops::matmul(x, w.tensor), b.tensor);
}

}  // namespace

VisionEncoder::VisionEncoder(EncoderConfig config, Rng init_rng) : config_(config) {
  config_.validate();
  const int d = config_.embed_dim;
  const int pd = config_.patch_dim();
  const int np = config_.num_patches();
  const int hidden = config_.mlp_hidden();
  const int r = config_.lora_rank;
  const int k = config_.num_classes;

  weights_.patch_w = frozen(trunc_normal({pd, d}, init_rng), "patch.w");
  weights_.patch_b = frozen(Tensor::zeros({d}), "patch.b");
  weights_.cls_token = frozen(trunc_normal({1, d}, init_rng), "cls_token");
  weights_.pos_embed = frozen(trunc_normal({1 + np, d}, init_rng), "pos_embed");

  weights_.blocks.resize(static_cast<std::size_t>(config_.depth));
  for (int i = 0; i < config_.depth; ++i) {
    BlockWeights& blk = weights_.blocks[static_cast<std::size_t>(i)];
    const std::string p = "block" + std::to_string(i) + ".";
    blk.ln1_gamma = frozen(ones({d}), p + "ln1.gamma");
    blk.ln1_beta = frozen(Tensor::zeros({d}), p + "ln1.beta");
    blk.wq = frozen(trunc_normal({d, d}, init_rng), p + "attn.wq");
    blk.bq = frozen(Tensor::zeros({d}), p + "attn.bq");
    blk.wk = frozen(trunc_normal({d, d}, init_rng), p + "attn.wk");
    blk.bk = frozen(Tensor::zeros({d}), p + "attn.bk");
    blk.wv = frozen(trunc_normal({d, d}, init_rng), p + "attn.wv");
    blk.bv = frozen(Tensor::zeros({d}), p + "attn.bv");
    blk.wo = frozen(trunc_normal({d, d}, init_rng), p + "attn.wo");
    blk.bo = frozen(Tensor::zeros({d}), p + "attn.bo");
    blk.lora_a_q = trainable(trunc_normal({d, r}, init_rng), p + "lora.q.a");
    blk.lora_b_q = trainable(Tensor::zeros({r, d}), p + "lora.q.b");
    blk.lora_a_v = trainable(trunc_normal({d, r}, init_rng), p + "lora.v.a");
    blk.lora_b_v = trainable(Tensor::zeros({r, d}), p + "lora.v.b");
    blk.ln2_gamma = frozen(ones({d}), p + "ln2.gamma");
    blk.ln2_beta = frozen(Tensor::zeros({d}), p + "ln2.beta");
    blk.w1 = frozen(trunc_normal({d, hidden}, init_rng), p + "mlp.w1");
    blk.b1 = frozen(Tensor::zeros({hidden}), p + "mlp.b1");
    blk.w2 = frozen(trunc_normal({hidden, d}, init_rng), p + "mlp.w2");
    blk.b2 = frozen(Tensor::zeros({d}), p + "mlp.b2");
  }

  weights_.final_gamma = frozen(ones({d}), "final_ln.gamma");
  weights_.final_beta = frozen(Tensor::zeros({d}), "final_ln.beta");
  weights_.head_w = trainable(trunc_normal({d, k}, init_rng), "head.w");
  weights_.head_b = trainable(Tensor::zeros({k}), "head.b");
}

Tensor VisionEncoder::project_patches(const Tensor& image) const {
  const int s = config_.image_size;
  const int p = config_.patch_size;
  const bool ok = (image.shape == std::vector<int>{s, s}) ||
                  (image.shape == std::vector<int>{s, s, 1});
  if (!ok) {
    throw std::invalid_argument("project_patches: image must be " + std::to_string(s) + "x" +
                                std::to_string(s) + " grayscale");
  }
  const int side = s / p;
  const int np = side * side;
  const int pd = p * p;
  auto patches = Tensor::zeros({np, pd});
  const float* px = image.data->data();
  for (int gy = 0; gy < side; ++gy) {
    for (int gx = 0; gx < side; ++gx) {
      float* row = patches.data->data() + static_cast<std::size_t>(gy * side + gx) * pd;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          row[y * p + x] = px[static_cast<std::size_t>(gy * p + y) * s + (gx * p + x)];
        }
      }
    }
  }
  return linear(patches, weights_.patch_w, weights_.patch_b);
}

Tensor VisionEncoder::patch_embed(const Tensor& image) const {
  Tensor tokens = project_patches(image);
  Tensor pos = ops::slice_rows(weights_.pos_embed.tensor, 1, config_.num_patches());
  return ops::add(tokens, pos);
}

Tensor VisionEncoder::forward(const Tensor& image, const std::vector<Tensor>& prompt_blocks,
                              ForwardStats* stats) const {
  const int d = config_.embed_dim;
  const int m = config_.prompt_tokens;
  for (const auto& blk : prompt_blocks) {
    if (blk.shape != std::vector<int>{m, d}) {
      throw std::invalid_argument("forward: prompt block must be " + std::to_string(m) + "x" +
                                  std::to_string(d));
    }
  }

  Tensor cls = ops::add(weights_.cls_token.tensor, ops::slice_rows(weights_.pos_embed.tensor, 0, 1));
  std::vector<Tensor> parts;
  parts.reserve(prompt_blocks.size() + 2);
  parts.push_back(cls);
  for (const auto& blk : prompt_blocks) parts.push_back(blk);
  parts.push_back(patch_embed(image));
  Tensor x = ops::concat_rows(parts);

  if (stats) {
    stats->sequence_length = x.shape[0];
    stats->prompt_blocks = static_cast<int>(prompt_blocks.size());
  }

  const int heads = config_.heads;
  const int dh = config_.head_dim();
  const float attn_scale = 1.0f / std::sqrt(static_cast<float>(dh));
  const float lora_mult = config_.lora_scale / static_cast<float>(config_.lora_rank);

  for (const auto& blk : weights_.blocks) {
    Tensor h = ops::layer_norm(x, blk.ln1_gamma.tensor, blk.ln1_beta.tensor);
    Tensor q = lora_linear(h, blk.wq, blk.bq, blk.lora_a_q, blk.lora_b_q, lora_mult, lora_enabled_);
    Tensor kk = linear(h, blk.wk, blk.bk);
    Tensor v = lora_linear(h, blk.wv, blk.bv, blk.lora_a_v, blk.lora_b_v, lora_mult, lora_enabled_);

    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      Tensor qh = ops::slice_cols(q, hd * dh, dh);
      Tensor kh = ops::slice_cols(kk, hd * dh, dh);
      Tensor vh = ops::slice_cols(v, hd * dh, dh);
      Tensor attn = ops::softmax(ops::scale(ops::matmul_nt(qh, kh), attn_scale));
      head_outs.push_back(ops::matmul(attn, vh));
    }
    Tensor att = linear(ops::concat_cols(head_outs), blk.wo, blk.bo);
    x = ops::add(x, att);

    Tensor h2 = ops::layer_norm(x, blk.ln2_gamma.tensor, blk.ln2_beta.tensor);
    Tensor mlp = linear(ops::gelu(linear(h2, blk.w1, blk.b1)), blk.w2, blk.b2);
    x = ops::add(x, mlp);
  }

  x = ops::layer_norm(x, weights_.final_gamma.tensor, weights_.final_beta.tensor);
  Tensor cls_out = ops::slice_rows(x, 0, 1);
  Tensor logits = ops::add_rowvec(ops::matmul(cls_out, weights_.head_w.tensor),
                                  weights_.head_b.tensor);
  return ops::reshape(logits, {config_.num_classes});
}

std::vector<Parameter*> VisionEncoder::parameters() {
  std::vector<Parameter*> out = {&weights_.patch_w, &weights_.patch_b, &weights_.cls_token,
                                 &weights_.pos_embed};
  for (auto& blk : weights_.blocks) {
    for (Parameter* p : {&blk.ln1_gamma, &blk.ln1_beta, &blk.wq, &blk.bq, &blk.wk, &blk.bk,
                         &blk.wv, &blk.bv, &blk.wo, &blk.bo, &blk.lora_a_q, &blk.lora_b_q,
                         &blk.lora_a_v, &blk.lora_b_v, &blk.ln2_gamma, &blk.ln2_beta, &blk.w1,
                         &blk.b1, &blk.w2, &blk.b2}) {
      out.push_back(p);
    }
  }
  out.push_back(&weights_.final_gamma);
  out.push_back(&weights_.final_beta);
  out.push_back(&weights_.head_w);
  out.push_back(&weights_.head_b);
  return out;
}

std::vector<const Parameter*> VisionEncoder::parameters() const {
  auto mut = const_cast<VisionEncoder*>(this)->parameters();
  return std::vector<const Parameter*>(mut.begin(), mut.end());
}

}  // namespace pfgt
