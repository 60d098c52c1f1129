#include "pfgt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pfgt/ops.hpp"

namespace pfgt {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be nonnegative");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (full_knowledge && ablation.use_kl) {
    throw std::invalid_argument("TrainConfig: full_knowledge forbids the unlearning loss");
  }
}

Trainer::Trainer(Model& model, const TrainConfig& config)
    : model_(model), config_(config), optimizer_(static_cast<float>(config.lr)) {
  config_.normalize();
  config_.validate();
}

int Trainer::draw_m(int label, Rng& rng) const {
  const int avail = model_.pool().active_count() - (model_.pool().is_active(label) ? 1 : 0);
  if (!config_.ablation.use_sampling) return avail;
  if (avail < 1) throw std::logic_error("draw_m: need at least one available distractor");
  return rng.uniform_int_range(1, avail);
}

std::vector<int> Trainer::assemble_learn_ids(int label, Rng& rng) const {
  if (!model_.pool().is_active(label)) {
    throw std::invalid_argument("learn loss: cannot train class " + std::to_string(label) +
                                ": its prompt was removed");
  }
  const int m = draw_m(label, rng);
  std::vector<int> ids = model_.pool().sample_distractor_ids(label, m, rng);
  ids.push_back(label);
  std::sort(ids.begin(), ids.end());
  if (config_.ablation.use_shuffle) PromptPool::shuffle_ids(ids, rng);
  return ids;
}

std::vector<int> Trainer::assemble_unlearn_ids(int label, Rng& rng) const {
  const int m = draw_m(label, rng);
  std::vector<int> ids = model_.pool().sample_distractor_ids(label, m, rng);
  if (config_.ablation.use_shuffle) PromptPool::shuffle_ids(ids, rng);
  return ids;
}

Tensor Trainer::learn_loss(const Dataset& data, const std::vector<std::size_t>& batch,
                           Rng& rng) const {
  if (batch.empty()) throw std::invalid_argument("learn_loss: empty batch");
  Tensor acc;
  for (std::size_t idx : batch) {
    const int label = data.label(idx);
    const auto ids = assemble_learn_ids(label, rng);
    Tensor logits = model_.forward_ids(data.image(idx), ids);
    Tensor ce = ops::cross_entropy(logits, label);
    acc = acc.data ? ops::add(acc, ce) : ce;
  }
  return ops::scale(acc, 1.0f / static_cast<float>(batch.size()));
}

Tensor Trainer::unlearn_loss(const Dataset& data, const std::vector<std::size_t>& batch,
                             Rng& rng) const {
  if (batch.empty()) throw std::invalid_argument("unlearn_loss: empty batch");
  if (model_.pool().active_count() < 2) {
    throw std::invalid_argument("unlearn_loss: needs at least 2 active classes");
  }
  Tensor acc;
  for (std::size_t idx : batch) {
    const auto ids = assemble_unlearn_ids(data.label(idx), rng);
    Tensor logits = model_.forward_ids(data.image(idx), ids);
    Tensor kl = ops::kl_to_uniform(logits);
    acc = acc.data ? ops::add(acc, kl) : kl;
  }
  return ops::scale(acc, 1.0f / static_cast<float>(batch.size()));
}

std::vector<LossBreakdown> Trainer::fit(const Dataset& train) {
  if (train.size() == 0) throw std::invalid_argument("fit: dataset is empty");
  if (model_.pool().active_count() != model_.pool().num_classes()) {
    throw std::invalid_argument("fit: all prompts must be active at training time");
  }
  for (int l : train.labels) {
    if (l < 0 || l >= model_.config().num_classes) {
      throw std::invalid_argument("fit: label " + std::to_string(l) +
                                  " outside the configured class range");
    }
  }

  Rng sampler = Rng(config_.seed).substream("sampler");
  auto params = model_.trainable_parameters();
  const float lambda = static_cast<float>(config_.lambda);
  const bool use_kl = config_.ablation.use_kl;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<LossBreakdown> log;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    sampler.shuffle(order);
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      const std::size_t bs = end - start;

      Adam::zero_grad(params);
      double learn_sum = 0.0, unlearn_sum = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const int label = train.label(idx);
        const Tensor image = train.image(idx);

        Tensor ce = ops::cross_entropy(model_.forward_ids(image, assemble_learn_ids(label, sampler)),
                                       label);
        learn_sum += static_cast<double>(ce.value());
        Tensor sample_loss = ops::scale(ce, 1.0f / static_cast<float>(bs));
        if (use_kl) {
          Tensor kl = ops::kl_to_uniform(model_.forward_ids(image, assemble_unlearn_ids(label, sampler)));
          unlearn_sum += static_cast<double>(kl.value());
          sample_loss = ops::add(sample_loss, ops::scale(kl, lambda / static_cast<float>(bs)));
        }
        backward(sample_loss);
      }
      optimizer_.step(params);

      LossBreakdown row;
      row.epoch = epoch;
      row.batch = batch_index++;
      row.learn_term = learn_sum / static_cast<double>(bs);
      row.unlearn_term = unlearn_sum / static_cast<double>(bs);
      row.total = row.learn_term + config_.lambda * row.unlearn_term;
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
      if (!std::isfinite(row.total)) {
        throw std::runtime_error("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(row.batch) +
                                 " (check learning rate and initialization)");
      }
      log.push_back(row);
    }
    if (on_epoch) {
      double learn = 0.0, unlearn = 0.0;
      int n = 0;
      for (const auto& row : log) {
        if (row.epoch == epoch) {
          learn += row.learn_term;
          unlearn += row.unlearn_term;
          ++n;
        }
      }
      on_epoch(epoch, learn / n, unlearn / n);
    }
  }
  return log;
}

void write_loss_log_csv(const std::vector<LossBreakdown>& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "epoch,batch,learn_term,unlearn_term,total,wall_ms\n";
  for (const auto& row : log) {
    os << row.epoch << ',' << row.batch << ',' << row.learn_term << ',' << row.unlearn_term << ','
       << row.total << ',' << row.wall_ms << '\n';
  }
}

}  // namespace pfgt
