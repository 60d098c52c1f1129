#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pfgt/data.hpp"
#include "pfgt/model.hpp"
#include "pfgt/optimizer.hpp"
#include "pfgt/rng.hpp"

namespace pfgt {

// Table-4 style switches. With sampling off, every active non-target prompt
// is a distractor; with shuffling off, blocks stay in ascending class order.
struct AblationConfig {
  bool use_kl = true;
  bool use_shuffle = true;
  bool use_sampling = true;
};

struct TrainConfig {
  double lambda = 1.0;  // weight on the unlearning term
  int epochs = 10;
  double lr = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AblationConfig ablation;
  bool full_knowledge = false;  // cross-entropy only baseline

  // full_knowledge implies no unlearning term.
  void normalize() {
    if (full_knowledge) ablation.use_kl = false;
  }
  void validate() const;
};

struct LossBreakdown {
  int epoch = 0;
  int batch = 0;
  double learn_term = 0.0;
  double unlearn_term = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
};

// Joint learn/unlearn objective over a prompt-gated model. Sampler
// randomness comes from substream("sampler") of the config seed; per sample
// the draw order is: learn m (if sampling), learn subset, learn shuffle,
// then the same three for the unlearning term.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config);

  // Prompt id sequence for the learning term: the true-class block plus m
  // distractors.
  std::vector<int> assemble_learn_ids(int label, Rng& rng) const;
  // Distractors only; the true-class block is excluded.
  std::vector<int> assemble_unlearn_ids(int label, Rng& rng) const;

  // Batch-mean losses (graph-building). The rng advances exactly as fit()
  // would advance it.
  Tensor learn_loss(const Dataset& data, const std::vector<std::size_t>& batch, Rng& rng) const;
  Tensor unlearn_loss(const Dataset& data, const std::vector<std::size_t>& batch, Rng& rng) const;

  // Full training run: returns the per-batch loss log. Only prompts, LoRA
  // factors and the head change; every frozen parameter stays bit-identical.
  std::vector<LossBreakdown> fit(const Dataset& train);

  const TrainConfig& config() const { return config_; }
  Adam& optimizer() { return optimizer_; }

  // Epoch-end hook (epoch index, mean learn term, mean unlearn term).
  std::function<void(int, double, double)> on_epoch;

 private:
  int draw_m(int label, Rng& rng) const;

  Model& model_;
  TrainConfig config_;
  Adam optimizer_;
};

void write_loss_log_csv(const std::vector<LossBreakdown>& log, const std::string& path);

}  // namespace pfgt
