#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pfgt/encoder.hpp"
#include "pfgt/ops.hpp"
#include "pfgt/rng.hpp"

using namespace pfgt;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.image_size = 16;
  c.patch_size = 4;
  c.embed_dim = 32;
  c.depth = 2;
  c.heads = 2;
  c.mlp_ratio = 2.0f;
  c.num_classes = 4;
  c.prompt_tokens = 2;
  c.lora_rank = 2;
  c.lora_scale = 4.0f;
  return c;
}

Tensor random_image(int size, Rng& rng) {
  auto t = Tensor::zeros({size, size});
  for (auto& v : *t.data) v = static_cast<float>(rng.next_double());
  return t;
}

Tensor random_block(int m, int d, Rng& rng) {
  auto t = Tensor::zeros({m, d});
  for (auto& v : *t.data) v = static_cast<float>(rng.normal(0.0, 0.05));
  return t;
}

// Row-reduction rank of a small matrix.
int matrix_rank(std::vector<std::vector<double>> a) {
  const double tol = 1e-9;
  int rank = 0;
  const std::size_t rows = a.size(), cols = a[0].size();
  for (std::size_t col = 0; col < cols && rank < static_cast<int>(rows); ++col) {
    std::size_t pivot = static_cast<std::size_t>(rank);
    for (std::size_t r = pivot + 1; r < rows; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < tol) continue;
    std::swap(a[static_cast<std::size_t>(rank)], a[pivot]);
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == static_cast<std::size_t>(rank)) continue;
      const double f = a[r][col] / a[static_cast<std::size_t>(rank)][col];
      for (std::size_t cc = col; cc < cols; ++cc) a[r][cc] -= f * a[static_cast<std::size_t>(rank)][cc];
    }
    ++rank;
  }
  return rank;
}

}  // namespace

TEST_CASE("patch embedding token count follows the grid formula") {
  VisionEncoder enc(small_config(), Rng(1));
  Rng rng(2);
  const auto tokens = enc.patch_embed(random_image(16, rng));
  CHECK(tokens.shape == std::vector<int>{16, 32});  // (16/4)^2 patches
}

TEST_CASE("zero image with zero bias and zero positional table gives zero tokens") {
  VisionEncoder enc(small_config(), Rng(1));
  std::fill(enc.weights().pos_embed.tensor.data->begin(),
            enc.weights().pos_embed.tensor.data->end(), 0.0f);
  const auto tokens = enc.patch_embed(Tensor::zeros({16, 16}));
  for (float v : *tokens.data) CHECK(v == 0.0f);
}

TEST_CASE("patch projection is local: one changed patch moves one token") {
  VisionEncoder enc(small_config(), Rng(3));
  Rng rng(4);
  auto a = random_image(16, rng);
  auto b = Tensor::zeros({16, 16});
  *b.data = *a.data;
  // Perturb one pixel inside patch (row 1, col 2) of the 4x4 grid.
  (*b.data)[static_cast<std::size_t>(5) * 16 + 9] += 0.5f;

  const auto ta = enc.project_patches(a);
  const auto tb = enc.project_patches(b);
  const int changed_patch = 1 * 4 + 2;
  for (int t = 0; t < 16; ++t) {
    bool differs = false;
    for (int j = 0; j < 32; ++j) {
      if (ta.at(static_cast<std::size_t>(t) * 32 + j) != tb.at(static_cast<std::size_t>(t) * 32 + j)) {
        differs = true;
      }
    }
    CHECK(differs == (t == changed_patch));
  }
}

TEST_CASE("forward produces K logits and the documented sequence length") {
  const auto cfg = small_config();
  VisionEncoder enc(cfg, Rng(5));
  Rng rng(6);
  const auto image = random_image(16, rng);

  for (int q : {0, 1, 3}) {
    std::vector<Tensor> blocks;
    for (int i = 0; i < q; ++i) blocks.push_back(random_block(2, 32, rng));
    ForwardStats stats;
    const auto logits = enc.forward(image, blocks, &stats);
    CHECK(logits.shape == std::vector<int>{4});
    CHECK(stats.sequence_length == 1 + q * 2 + 16);
  }
}

TEST_CASE("forward rejects malformed prompt blocks and images") {
  VisionEncoder enc(small_config(), Rng(7));
  Rng rng(8);
  const auto image = random_image(16, rng);
  CHECK_THROWS_AS(enc.forward(image, {random_block(3, 32, rng)}), std::invalid_argument);
  CHECK_THROWS_AS(enc.forward(image, {random_block(2, 16, rng)}), std::invalid_argument);
  CHECK_THROWS_AS(enc.forward(random_image(8, rng), {}), std::invalid_argument);
}

TEST_CASE("forward is deterministic") {
  VisionEncoder enc(small_config(), Rng(9));
  Rng rng(10);
  const auto image = random_image(16, rng);
  const std::vector<Tensor> blocks = {random_block(2, 32, rng), random_block(2, 32, rng)};
  const auto l1 = enc.forward(image, blocks);
  const auto l2 = enc.forward(image, blocks);
  CHECK(*l1.data == *l2.data);
}

TEST_CASE("permuting prompt blocks moves logits by at most fp reassociation noise") {
  VisionEncoder enc(small_config(), Rng(11));
  Rng rng(12);
  const auto image = random_image(16, rng);
  std::vector<Tensor> blocks = {random_block(2, 32, rng), random_block(2, 32, rng),
                                random_block(2, 32, rng)};
  const auto l1 = enc.forward(image, blocks);
  std::swap(blocks[0], blocks[2]);
  std::swap(blocks[0], blocks[1]);
  const auto l2 = enc.forward(image, blocks);
  for (std::size_t i = 0; i < l1.numel(); ++i) {
    CHECK(std::fabs(l1.at(i) - l2.at(i)) < 1e-5);
  }
}

TEST_CASE("lora apply: zero B leaves the base projection exact, rank and scale laws hold") {
  using DTensor = TensorT<double>;
  Rng rng(13);
  const int d = 8, r = 2, n = 5;
  auto rand2d = [&](int rows, int cols) {
    auto t = DTensor::zeros({rows, cols});
    for (auto& v : *t.data) v = rng.normal(0.0, 1.0);
    return t;
  };
  const auto x = rand2d(n, d);
  const auto w = rand2d(d, d);
  const auto a = rand2d(d, r);
  const auto zero_b = DTensor::zeros({r, d});
  const auto base = ops::matmul(x, w);

  // B = 0: adapted output equals the frozen projection exactly.
  auto adapted = ops::add(base, ops::scale(ops::matmul(ops::matmul(x, a), zero_b), 2.0));
  CHECK(*adapted.data == *base.data);

  // Effective delta has rank <= r.
  const auto b = rand2d(r, d);
  const auto delta = ops::scale(ops::matmul(a, b), 4.0 / r);
  std::vector<std::vector<double>> dm(static_cast<std::size_t>(d),
                                      std::vector<double>(static_cast<std::size_t>(d)));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) dm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
        delta.at(static_cast<std::size_t>(i) * d + j);
  }
  CHECK(matrix_rank(dm) <= r);

  // Doubling the scale doubles the delta elementwise.
  const auto d1 = ops::matmul(ops::matmul(x, a), b);
  for (double s : {0.5, 4.0}) {
    const auto once = ops::scale(d1, s);
    const auto twice = ops::scale(d1, 2.0 * s);
    for (std::size_t i = 0; i < once.numel(); ++i) {
      CHECK(std::fabs(twice.at(i) - 2.0 * once.at(i)) < 1e-9);
    }
  }
}

TEST_CASE("strip_lora is idempotent, non-destructive, and equals zeroed B factors") {
  const auto cfg = small_config();
  VisionEncoder enc(cfg, Rng(14));
  Rng rng(15);
  // Give the B factors nonzero values so LoRA actually contributes.
  for (auto& blk : enc.weights().blocks) {
    for (auto* p : {&blk.lora_b_q, &blk.lora_b_v}) {
      for (auto& v : *p->tensor.data) v = static_cast<float>(rng.normal(0.0, 0.05));
    }
  }
  const auto image = random_image(16, rng);
  const std::vector<Tensor> blocks = {random_block(2, 32, rng)};

  const auto intact = enc.forward(image, blocks);
  enc.set_lora_enabled(false);
  const auto stripped1 = enc.forward(image, blocks);
  enc.set_lora_enabled(false);  // second strip: no further change
  const auto stripped2 = enc.forward(image, blocks);
  CHECK(*stripped1.data == *stripped2.data);

  bool lora_matters = false;
  for (std::size_t i = 0; i < intact.numel(); ++i) {
    if (intact.at(i) != stripped1.at(i)) lora_matters = true;
  }
  CHECK(lora_matters);

  enc.set_lora_enabled(true);
  const auto restored = enc.forward(image, blocks);
  CHECK(*restored.data == *intact.data);

  for (auto& blk : enc.weights().blocks) {
    for (auto* p : {&blk.lora_b_q, &blk.lora_b_v}) {
      std::fill(p->tensor.data->begin(), p->tensor.data->end(), 0.0f);
    }
  }
  const auto zeroed = enc.forward(image, blocks);
  CHECK(*zeroed.data == *stripped1.data);
}

TEST_CASE("freshly initialized LoRA contributes exactly zero") {
  VisionEncoder enc(small_config(), Rng(16));
  Rng rng(17);
  const auto image = random_image(16, rng);
  const auto with_lora = enc.forward(image, {});
  enc.set_lora_enabled(false);
  const auto without = enc.forward(image, {});
  CHECK(*with_lora.data == *without.data);
}

TEST_CASE("backbone parameters are frozen, adapters and head trainable") {
  VisionEncoder enc(small_config(), Rng(18));
  int frozen_count = 0, trainable_count = 0;
  for (const auto* p : static_cast<const VisionEncoder&>(enc).parameters()) {
    if (p->frozen) {
      ++frozen_count;
      CHECK_FALSE(p->tensor.requires_grad);
    } else {
      ++trainable_count;
      CHECK(p->tensor.requires_grad);
      const bool is_lora = p->name.find("lora") != std::string::npos;
      const bool is_head = p->name.find("head") != std::string::npos;
      CHECK((is_lora || is_head));
    }
  }
  CHECK(frozen_count > 0);
  CHECK(trainable_count == 2 * 4 + 2);  // 4 LoRA factors per block x2 blocks, head w+b
}
