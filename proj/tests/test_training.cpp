#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pfgt/data.hpp"
#include "pfgt/model.hpp"
#include "pfgt/ops.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/training.hpp"

using namespace pfgt;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.image_size = 16;
  c.patch_size = 4;
  c.embed_dim = 32;
  c.depth = 2;
  c.heads = 2;
  c.num_classes = 4;
  c.prompt_tokens = 2;
  c.lora_rank = 2;
  return c;
}

SplitDatasets tiny_data(std::uint64_t seed, int per_class = 20) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.samples_per_class = per_class;
  spec.image_size = 16;
  spec.noise_std = 0.2;
  return generate_synthetic(spec, Rng(seed).substream("data"));
}

}  // namespace

TEST_CASE("batch learn loss equals the hand-assembled mean of cross entropies") {
  Model model(tiny_config(), 11);
  TrainConfig tc;
  tc.seed = 11;
  Trainer trainer(model, tc);
  const auto data = tiny_data(11);

  const std::vector<std::size_t> batch = {0, 15, 31, 47};
  Rng path_a = Rng(11).substream("sampler");
  Rng path_b = path_a;  // frozen copy replays identical draws

  const double got = trainer.learn_loss(data.train, batch, path_a).value();

  double manual = 0.0;
  for (std::size_t idx : batch) {
    const int label = data.train.label(idx);
    const auto ids = trainer.assemble_learn_ids(label, path_b);
    const auto logits = model.forward_ids(data.train.image(idx), ids);
    manual += static_cast<double>(ops::cross_entropy(logits, label).value());
  }
  manual /= static_cast<double>(batch.size());
  CHECK(std::fabs(got - manual) < 1e-6);
}

TEST_CASE("learn sequences contain the label block; unlearn sequences never do") {
  Model model(tiny_config(), 12);
  TrainConfig tc;
  tc.seed = 12;
  Trainer trainer(model, tc);
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const int label = rng.uniform_int(4);
    const auto learn_ids = trainer.assemble_learn_ids(label, rng);
    CHECK(std::count(learn_ids.begin(), learn_ids.end(), label) == 1);
    CHECK(learn_ids.size() >= 2);

    const auto unlearn_ids = trainer.assemble_unlearn_ids(label, rng);
    CHECK(std::count(unlearn_ids.begin(), unlearn_ids.end(), label) == 0);
    CHECK(unlearn_ids.size() >= 1);
  }
}

TEST_CASE("ablation switches only change subset choice and ordering") {
  Model model(tiny_config(), 13);
  TrainConfig tc;
  tc.seed = 13;
  tc.ablation.use_sampling = false;
  tc.ablation.use_shuffle = false;
  Trainer trainer(model, tc);
  Rng rng(4);
  // No sampling, no shuffling: canonical full sets every time.
  for (int label = 0; label < 4; ++label) {
    CHECK(trainer.assemble_learn_ids(label, rng) == std::vector<int>{0, 1, 2, 3});
    std::vector<int> expect_unlearn;
    for (int c = 0; c < 4; ++c) {
      if (c != label) expect_unlearn.push_back(c);
    }
    CHECK(trainer.assemble_unlearn_ids(label, rng) == expect_unlearn);
  }
}

TEST_CASE("loss composition: total == learn + lambda * unlearn per batch") {
  Model model(tiny_config(), 14);
  TrainConfig tc;
  tc.seed = 14;
  tc.lambda = 0.7;
  tc.epochs = 1;
  tc.batch_size = 16;
  Trainer trainer(model, tc);
  const auto data = tiny_data(14);
  for (const auto& row : trainer.fit(data.train)) {
    CHECK(std::fabs(row.total - (row.learn_term + tc.lambda * row.unlearn_term)) < 1e-6);
    CHECK(row.unlearn_term > 0.0);
  }
}

TEST_CASE("lambda zero reduces the total loss to the learn term exactly") {
  Model model(tiny_config(), 15);
  TrainConfig tc;
  tc.seed = 15;
  tc.lambda = 0.0;
  tc.epochs = 1;
  tc.batch_size = 16;
  Trainer trainer(model, tc);
  const auto data = tiny_data(15);
  for (const auto& row : trainer.fit(data.train)) {
    CHECK(row.total == row.learn_term);
  }
}

TEST_CASE("full knowledge baseline never produces an unlearning term") {
  Model model(tiny_config(), 16);
  TrainConfig tc;
  tc.seed = 16;
  tc.full_knowledge = true;
  tc.epochs = 1;
  tc.batch_size = 16;
  tc.normalize();
  Trainer trainer(model, tc);
  const auto data = tiny_data(16);
  for (const auto& row : trainer.fit(data.train)) {
    CHECK(row.unlearn_term == 0.0);
    CHECK(row.total == row.learn_term);
  }
}

TEST_CASE("full_knowledge forces the unlearning loss off") {
  Model model(tiny_config(), 17);
  TrainConfig tc;
  tc.full_knowledge = true;
  tc.ablation.use_kl = true;  // contradictory on purpose
  Trainer trainer(model, tc);
  CHECK_FALSE(trainer.config().ablation.use_kl);

  // Unnormalized contradictory configs fail validation directly.
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}

TEST_CASE("training a forgotten class is rejected") {
  Model model(tiny_config(), 18);
  model.pool().remove_prompt(2);
  TrainConfig tc;
  tc.seed = 18;
  Trainer trainer(model, tc);
  const auto data = tiny_data(18);

  std::vector<std::size_t> bad_batch;
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    if (data.train.label(i) == 2) bad_batch.push_back(i);
  }
  bad_batch.resize(4);
  Rng rng(1);
  CHECK_THROWS_WITH_AS(trainer.learn_loss(data.train, bad_batch, rng),
                       doctest::Contains("prompt was removed"), std::invalid_argument);

  // fit requires every prompt active.
  CHECK_THROWS_AS(trainer.fit(data.train), std::invalid_argument);
}

TEST_CASE("identical seeds give bit-identical fits; frozen weights never move") {
  const auto data = tiny_data(19);
  TrainConfig tc;
  tc.seed = 19;
  tc.epochs = 2;
  tc.batch_size = 16;

  Model m1(tiny_config(), 19);
  Model m2(tiny_config(), 19);

  // Snapshot of the frozen backbone before training.
  std::vector<std::vector<float>> frozen_before;
  for (auto* p : m1.parameters()) {
    if (p->frozen) frozen_before.push_back(*p->tensor.data);
  }

  Trainer(m1, tc).fit(data.train);
  Trainer(m2, tc).fit(data.train);

  auto p1 = m1.parameters();
  auto p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(*p1[i]->tensor.data == *p2[i]->tensor.data);

  std::size_t fi = 0;
  for (auto* p : m1.parameters()) {
    if (p->frozen) CHECK(*p->tensor.data == frozen_before[fi++]);
  }
}

TEST_CASE("gradient flow partition: prompts, LoRA and head move; nothing else") {
  const auto data = tiny_data(20);
  TrainConfig tc;
  tc.seed = 20;
  tc.epochs = 1;
  tc.batch_size = 32;

  Model model(tiny_config(), 20);
  Model init(tiny_config(), 20);  // identical initialization snapshot
  Trainer(model, tc).fit(data.train);

  auto now = model.parameters();
  auto was = init.parameters();
  for (std::size_t i = 0; i < now.size(); ++i) {
    const bool same = (*now[i]->tensor.data == *was[i]->tensor.data);
    if (now[i]->frozen) {
      CHECK(same);
    } else {
      CHECK_FALSE(same);
    }
  }
}

TEST_CASE("learn loss decreases over a short fit") {
  const auto data = tiny_data(21, 30);
  TrainConfig tc;
  tc.seed = 21;
  tc.epochs = 3;
  tc.batch_size = 16;
  Model model(tiny_config(), 21);
  Trainer trainer(model, tc);
  const auto log = trainer.fit(data.train);

  double first_epoch = 0.0, last_epoch = 0.0;
  int nf = 0, nl = 0;
  for (const auto& row : log) {
    if (row.epoch == 0) {
      first_epoch += row.learn_term;
      ++nf;
    }
    if (row.epoch == tc.epochs - 1) {
      last_epoch += row.learn_term;
      ++nl;
    }
  }
  CHECK(last_epoch / nl < first_epoch / nf);
}

TEST_CASE("non-finite values abort training with a diagnostic") {
  const auto data = tiny_data(22);
  TrainConfig tc;
  tc.seed = 22;
  tc.epochs = 1;
  tc.batch_size = 16;
  Model model(tiny_config(), 22);
  // Poison one head weight; the first forward must abort, not train on.
  (*model.encoder().weights().head_w.tensor.data)[0] = std::nanf("");
  Trainer trainer(model, tc);
  CHECK_THROWS_WITH_AS(trainer.fit(data.train), doctest::Contains("non-finite"),
                       std::invalid_argument);
}
