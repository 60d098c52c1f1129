#pragma once

#include <vector>

#include "pfgt/optimizer.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/tensor.hpp"

namespace pfgt {

// Per-class prompt token blocks plus the activity mask that implements
// unlearning. Removal flips a mask bit and touches nothing else; restore
// brings the untouched values back. Purge is the irreversible variant:
// it zeroes the stored block and permanently retires the class.
class PromptPool {
 public:
  PromptPool(int num_classes, int tokens_per_class, int embed_dim, Rng init_rng);

  int num_classes() const { return static_cast<int>(params_.size()); }
  int tokens_per_class() const { return tokens_; }
  int active_count() const;
  bool is_active(int c) const { return active_.at(static_cast<std::size_t>(c)); }
  bool is_purged(int c) const { return purged_.at(static_cast<std::size_t>(c)); }

  const std::vector<bool>& active_mask() const { return active_; }
  const std::vector<bool>& purged_mask() const { return purged_; }
  // Mask overrides for persistence and sweep snapshots. A purged class can
  // never be reactivated.
  void set_masks(std::vector<bool> active, std::vector<bool> purged);

  std::vector<int> active_ids() const;  // ascending class order

  const Tensor& block(int c) const { return params_.at(static_cast<std::size_t>(c)).tensor; }
  Parameter* param(int c) { return &params_.at(static_cast<std::size_t>(c)); }

  // Distractor sampler: a uniform m-subset of active prompts excluding the
  // target, returned in ascending class order (shuffling is a separate step).
  std::vector<int> sample_distractor_ids(int target, int m, Rng& rng) const;

  // Prompt-order permutation: uniform shuffle of a block id list.
  static void shuffle_ids(std::vector<int>& ids, Rng& rng) { rng.shuffle(ids); }

  std::vector<Tensor> blocks_for(const std::vector<int>& ids) const;

  // Mask-flip unlearning. Returns false (warning, no-op) when the class is
  // already inactive. Never reads data, never computes gradients.
  bool remove_prompt(int c);
  // Reactivation; rejected for purged classes. Returns false when already
  // active.
  bool restore_prompt(int c);
  // Irreversible removal: zeroes the block so the next checkpoint persists
  // no trace of it.
  void purge_prompt(int c);

  std::vector<Parameter*> parameters();

 private:
  void check_class(int c) const;

  int tokens_;
  std::vector<Parameter> params_;
  std::vector<bool> active_;
  std::vector<bool> purged_;
};

}  // namespace pfgt
