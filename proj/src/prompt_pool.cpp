#include "pfgt/prompt_pool.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pfgt {

PromptPool::PromptPool(int num_classes, int tokens_per_class, int embed_dim, Rng init_rng)
    : tokens_(tokens_per_class) {
  if (num_classes <= 0 || tokens_per_class <= 0 || embed_dim <= 0) {
    throw std::invalid_argument("PromptPool: dimensions must be positive");
  }
  params_.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    auto t = Tensor::zeros({tokens_per_class, embed_dim});
    for (auto& v : *t.data) v = static_cast<float>(init_rng.truncated_normal(0.0, 0.02, 2.0));
    params_.emplace_back(std::move(t), "prompt." + std::to_string(c), false);
  }
  active_.assign(static_cast<std::size_t>(num_classes), true);
  purged_.assign(static_cast<std::size_t>(num_classes), false);
}

int PromptPool::active_count() const {
  return static_cast<int>(std::count(active_.begin(), active_.end(), true));
}

void PromptPool::set_masks(std::vector<bool> active, std::vector<bool> purged) {
  if (active.size() != params_.size() || purged.size() != params_.size()) {
    throw std::invalid_argument("PromptPool::set_masks: mask length mismatch");
  }
  for (std::size_t c = 0; c < params_.size(); ++c) {
    if (purged[c] && active[c]) {
      throw std::invalid_argument("PromptPool::set_masks: purged class cannot be active");
    }
  }
  active_ = std::move(active);
  purged_ = std::move(purged);
}

std::vector<int> PromptPool::active_ids() const {
  std::vector<int> ids;
  for (int c = 0; c < num_classes(); ++c) {
    if (active_[static_cast<std::size_t>(c)]) ids.push_back(c);
  }
  return ids;
}

void PromptPool::check_class(int c) const {
  if (c < 0 || c >= num_classes()) {
    throw std::invalid_argument("PromptPool: class " + std::to_string(c) + " out of range [0," +
                                std::to_string(num_classes()) + ")");
  }
}

std::vector<int> PromptPool::sample_distractor_ids(int target, int m, Rng& rng) const {
  check_class(target);
  if (!is_active(target)) {
    throw std::invalid_argument("sample_distractors: target class " + std::to_string(target) +
                                " is inactive");
  }
  std::vector<int> candidates;
  for (int c : active_ids()) {
    if (c != target) candidates.push_back(c);
  }
  if (m < 0 || m > static_cast<int>(candidates.size())) {
    throw std::invalid_argument("sample_distractors: m=" + std::to_string(m) +
                                " exceeds available distractors (" +
                                std::to_string(candidates.size()) + ")");
  }
  std::vector<int> picked = rng.sample_subset(static_cast<int>(candidates.size()), m);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i : picked) out.push_back(candidates[static_cast<std::size_t>(i)]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Tensor> PromptPool::blocks_for(const std::vector<int>& ids) const {
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (int c : ids) {
    check_class(c);
    if (!is_active(c)) {
      throw std::invalid_argument("blocks_for: class " + std::to_string(c) + " is inactive");
    }
    out.push_back(params_[static_cast<std::size_t>(c)].tensor);
  }
  return out;
}

bool PromptPool::remove_prompt(int c) {
  check_class(c);
  if (!active_[static_cast<std::size_t>(c)]) return false;  // warning: already inactive
  active_[static_cast<std::size_t>(c)] = false;
  return true;
}

bool PromptPool::restore_prompt(int c) {
  check_class(c);
  if (purged_[static_cast<std::size_t>(c)]) {
    throw std::invalid_argument("restore_prompt: class " + std::to_string(c) +
                                " was purged and cannot be restored");
  }
  if (active_[static_cast<std::size_t>(c)]) return false;  // warning: already active
  active_[static_cast<std::size_t>(c)] = true;
  return true;
}

void PromptPool::purge_prompt(int c) {
  check_class(c);
  active_[static_cast<std::size_t>(c)] = false;
  purged_[static_cast<std::size_t>(c)] = true;
  auto& data = *params_[static_cast<std::size_t>(c)].tensor.data;
  std::fill(data.begin(), data.end(), 0.0f);
  params_[static_cast<std::size_t>(c)].tensor.zero_grad();
}

std::vector<Parameter*> PromptPool::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

}  // namespace pfgt
