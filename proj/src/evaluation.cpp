#include "pfgt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pfgt/ops.hpp"

namespace pfgt {

ForgetScenario ForgetScenario::from_forget(std::vector<int> forget, int num_classes) {
  std::sort(forget.begin(), forget.end());
  forget.erase(std::unique(forget.begin(), forget.end()), forget.end());
  for (int c : forget) {
    if (c < 0 || c >= num_classes) {
      throw std::invalid_argument("ForgetScenario: class " + std::to_string(c) + " out of range");
    }
  }
  ForgetScenario s;
  s.forget_set = std::move(forget);
  for (int c = 0; c < num_classes; ++c) {
    if (!std::binary_search(s.forget_set.begin(), s.forget_set.end(), c)) {
      s.retain_set.push_back(c);
    }
  }
  return s;
}

Predictor model_predictor(const Model& model) {
  return [&model](const Tensor& image) { return model.predict(image); };
}

double class_averaged_accuracy(const Predictor& predict, const Dataset& data,
                               const std::vector<int>& classes) {
  if (classes.empty()) throw std::invalid_argument("class_averaged_accuracy: empty class set");
  double acc_sum = 0.0;
  for (int c : classes) {
    const auto idx = data.indices_of_class(c);
    if (idx.empty()) {
      throw std::invalid_argument("class_averaged_accuracy: no samples of class " +
                                  std::to_string(c));
    }
    long correct = 0;
    for (std::size_t i : idx) {
      if (predict(data.image(i)) == c) ++correct;
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(idx.size());
  }
  return 100.0 * acc_sum / static_cast<double>(classes.size());
}

double retain_accuracy(const Model& model, const Dataset& test, const ForgetScenario& scenario) {
  if (scenario.retain_set.empty()) {
    throw std::invalid_argument("retain_accuracy: scenario retains no classes");
  }
  return class_averaged_accuracy(model_predictor(model), test, scenario.retain_set);
}

double forget_accuracy(const Model& model, const Dataset& test, const ForgetScenario& scenario) {
  if (scenario.forget_set.empty()) {
    throw std::invalid_argument("forget_accuracy: scenario forgets no classes");
  }
  return class_averaged_accuracy(model_predictor(model), test, scenario.forget_set);
}

double mean_kl_to_uniform(const Model& model, const Dataset& test,
                          const std::vector<int>& classes) {
  NoGradGuard no_grad;
  double sum = 0.0;
  long n = 0;
  for (int c : classes) {
    for (std::size_t i : test.indices_of_class(c)) {
      sum += static_cast<double>(ops::kl_to_uniform(model.infer_logits(test.image(i))).value());
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("mean_kl_to_uniform: no samples of the given classes");
  return sum / static_cast<double>(n);
}

namespace {

Dataset cap_per_class(const Dataset& data, int cap) {
  if (cap <= 0) return data;
  Dataset out;
  out.image_size = data.image_size;
  const std::size_t pix = static_cast<std::size_t>(data.image_size) * data.image_size;
  for (int c = 0; c < data.num_classes(); ++c) {
    const auto idx = data.indices_of_class(c);
    const std::size_t take = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(cap));
    for (std::size_t i = 0; i < take; ++i) {
      out.pixels.insert(out.pixels.end(), data.pixels.begin() + static_cast<std::ptrdiff_t>(idx[i] * pix),
                        data.pixels.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * pix));
      out.labels.push_back(c);
    }
  }
  return out;
}

std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
  std::uint64_t r = 1;
  for (int i = 0; i < k; ++i) {
    r = r * static_cast<std::uint64_t>(n - i) / static_cast<std::uint64_t>(i + 1);
    if (r > cap) return cap + 1;
  }
  return r;
}

std::vector<std::vector<int>> enumerate_subsets(int num_classes, int f, std::uint64_t seed,
                                                int max_combinations) {
  std::vector<std::vector<int>> combos;
  const std::uint64_t total =
      binomial_capped(num_classes, f, static_cast<std::uint64_t>(max_combinations));
  if (total <= static_cast<std::uint64_t>(max_combinations)) {
    std::vector<int> cur(static_cast<std::size_t>(f));
    for (int i = 0; i < f; ++i) cur[static_cast<std::size_t>(i)] = i;
    for (;;) {
      combos.push_back(cur);
      int i = f - 1;
      while (i >= 0 && cur[static_cast<std::size_t>(i)] == num_classes - f + i) --i;
      if (i < 0) break;
      ++cur[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < f; ++j) {
        cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  } else {
    Rng rng = Rng(seed).substream("sweep");
    std::set<std::vector<int>> seen;
    while (static_cast<int>(seen.size()) < max_combinations) {
      auto s = rng.sample_subset(num_classes, f);
      std::sort(s.begin(), s.end());
      seen.insert(std::move(s));
    }
    combos.assign(seen.begin(), seen.end());
  }
  return combos;
}

struct MeanStd {
  double mean = 0.0, std_dev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - r.mean) * (x - r.mean);
  r.std_dev = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

}  // namespace

EvalReport scenario_sweep(Model& model, const Dataset& test, int f, std::uint64_t seed,
                          int max_combinations, int per_class_cap) {
  const int k = model.pool().num_classes();
  if (f < 1 || f > k - 1) {
    throw std::invalid_argument("scenario_sweep: f must be in [1, " + std::to_string(k - 1) + "]");
  }
  const Dataset eval_set = cap_per_class(test, per_class_cap);

  const auto saved_active = model.pool().active_mask();
  const auto saved_purged = model.pool().purged_mask();

  EvalReport report;
  report.f = f;
  std::vector<double> accs_r, accs_f;
  for (const auto& combo : enumerate_subsets(k, f, seed, max_combinations)) {
    // All prompts back (purged ones stay gone), then drop this combination.
    std::vector<bool> active(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) active[static_cast<std::size_t>(c)] = !saved_purged[static_cast<std::size_t>(c)];
    for (int c : combo) active[static_cast<std::size_t>(c)] = false;
    model.pool().set_masks(active, saved_purged);

    const auto scenario = ForgetScenario::from_forget(combo, k);
    CombinationRow row;
    row.forget_set = scenario.forget_set;
    row.acc_r = retain_accuracy(model, eval_set, scenario);
    row.acc_f = forget_accuracy(model, eval_set, scenario);
    accs_r.push_back(row.acc_r);
    accs_f.push_back(row.acc_f);
    report.rows.push_back(std::move(row));
  }
  model.pool().set_masks(saved_active, saved_purged);

  report.n_combinations = static_cast<int>(report.rows.size());
  const auto r = mean_std(accs_r);
  const auto fm = mean_std(accs_f);
  report.acc_r_mean = r.mean;
  report.acc_r_std = r.std_dev;
  report.acc_f_mean = fm.mean;
  report.acc_f_std = fm.std_dev;
  return report;
}

std::vector<TraceRow> sequential_inference(Model& model, const Dataset& test,
                                           const SequentialSchedule& schedule, int num_batches,
                                           int per_class_per_batch, std::uint64_t seed) {
  const int k = model.pool().num_classes();
  std::set<int> scheduled;
  for (const auto& [batch, classes] : schedule.removals) {
    if (batch < 0 || batch >= num_batches) {
      throw std::invalid_argument("sequential_inference: removal at batch " +
                                  std::to_string(batch) + " is outside the stream");
    }
    for (int c : classes) {
      if (c < 0 || c >= k) {
        throw std::invalid_argument("sequential_inference: unknown class " + std::to_string(c) +
                                    " in schedule");
      }
      if (!scheduled.insert(c).second) {
        throw std::invalid_argument("sequential_inference: class " + std::to_string(c) +
                                    " scheduled twice");
      }
    }
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    by_class[static_cast<std::size_t>(c)] = test.indices_of_class(c);
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument("sequential_inference: no test samples of class " +
                                  std::to_string(c));
    }
  }

  const auto saved_active = model.pool().active_mask();
  const auto saved_purged = model.pool().purged_mask();
  Rng rng = Rng(seed).substream("stream");

  std::vector<TraceRow> rows;
  for (int b = 0; b < num_batches; ++b) {
    if (auto it = schedule.removals.find(b); it != schedule.removals.end()) {
      for (int c : it->second) model.pool().remove_prompt(c);
    }

    long retain_correct = 0, retain_n = 0;
    std::vector<long> class_correct(static_cast<std::size_t>(k), 0);
    for (int c = 0; c < k; ++c) {
      const auto& pool_idx = by_class[static_cast<std::size_t>(c)];
      for (int i = 0; i < per_class_per_batch; ++i) {
        const std::size_t idx = pool_idx[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(pool_idx.size())))];
        const bool correct = model.predict(test.image(idx)) == c;
        if (scheduled.count(c)) {
          if (correct) ++class_correct[static_cast<std::size_t>(c)];
        } else {
          ++retain_n;
          if (correct) ++retain_correct;
        }
      }
    }

    if (retain_n > 0) {
      rows.push_back({b, "retain", 100.0 * retain_correct / static_cast<double>(retain_n),
                      static_cast<int>(retain_n)});
    }
    for (int c : scheduled) {
      rows.push_back({b, "class" + std::to_string(c),
                      100.0 * class_correct[static_cast<std::size_t>(c)] /
                          static_cast<double>(per_class_per_batch),
                      per_class_per_batch});
    }
  }

  model.pool().set_masks(saved_active, saved_purged);
  return rows;
}

MiaReport mia_from_scores(const std::vector<double>& member_scores,
                          const std::vector<double>& nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw std::invalid_argument("mia: member and nonmember score sets must be nonempty");
  }

  // Attacker split: even indices fit the threshold, odd indices measure it.
  auto split = [](const std::vector<double>& v) {
    std::pair<std::vector<double>, std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      (i % 2 == 0 ? out.first : out.second).push_back(v[i]);
    }
    if (out.second.empty()) out.second = out.first;  // degenerate tiny sets
    return out;
  };
  const auto [m_fit, m_eval] = split(member_scores);
  const auto [n_fit, n_eval] = split(nonmember_scores);

  auto balanced_accuracy = [](const std::vector<double>& member, const std::vector<double>& nonmember,
                              double threshold, bool member_above) {
    long tp = 0, tn = 0;
    for (double s : member) {
      if (member_above ? (s >= threshold) : (s <= threshold)) ++tp;
    }
    for (double s : nonmember) {
      if (member_above ? (s < threshold) : (s > threshold)) ++tn;
    }
    return 0.5 * (static_cast<double>(tp) / static_cast<double>(member.size()) +
                  static_cast<double>(tn) / static_cast<double>(nonmember.size()));
  };

  // Candidate thresholds are the observed fit scores themselves, so the
  // fitted rule is invariant under strictly monotone score transforms.
  std::vector<double> candidates = m_fit;
  candidates.insert(candidates.end(), n_fit.begin(), n_fit.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_fit = -1.0, best_threshold = candidates.front();
  bool best_above = true;
  for (bool above : {true, false}) {
    for (double t : candidates) {
      const double ba = balanced_accuracy(m_fit, n_fit, t, above);
      if (ba > best_fit + 1e-12) {
        best_fit = ba;
        best_threshold = t;
        best_above = above;
      }
    }
  }

  MiaReport report;
  report.threshold = best_threshold;
  report.member_above = best_above;
  report.balanced_accuracy = balanced_accuracy(m_eval, n_eval, best_threshold, best_above);
  report.advantage = std::max(0.0, 2.0 * (report.balanced_accuracy - 0.5)) * 100.0;
  report.n_member = member_scores.size();
  report.n_nonmember = nonmember_scores.size();
  double ms = 0.0, ns = 0.0;
  for (double s : member_scores) ms += s;
  for (double s : nonmember_scores) ns += s;
  report.member_mean = ms / static_cast<double>(member_scores.size());
  report.nonmember_mean = ns / static_cast<double>(nonmember_scores.size());
  return report;
}

std::vector<double> confidence_scores(const Model& model, const Dataset& data,
                                      const std::vector<int>& target_classes) {
  NoGradGuard no_grad;
  std::set<int> targets(target_classes.begin(), target_classes.end());
  std::vector<double> scores;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!targets.count(data.label(i))) continue;
    const auto probs = ops::softmax(model.infer_logits(data.image(i)));
    float best = 0.0f;
    for (float p : *probs.data) best = std::max(best, p);
    scores.push_back(static_cast<double>(best));
  }
  return scores;
}

MiaReport mia_attack(const Model& model, const Dataset& member_set, const Dataset& nonmember_set,
                     const std::vector<int>& target_classes) {
  if (target_classes.empty()) throw std::invalid_argument("mia_attack: no target classes");
  const auto member_scores = confidence_scores(model, member_set, target_classes);
  const auto nonmember_scores = confidence_scores(model, nonmember_set, target_classes);
  return mia_from_scores(member_scores, nonmember_scores);
}

JailbreakResult jailbreak_eval(Model& model, const Dataset& test) {
  if (model.pool().active_count() != model.pool().num_classes()) {
    throw std::invalid_argument("jailbreak_eval: all prompts must be active");
  }
  std::vector<int> all_classes;
  for (int c = 0; c < model.pool().num_classes(); ++c) all_classes.push_back(c);

  JailbreakResult result;
  result.intact_accuracy = class_averaged_accuracy(model_predictor(model), test, all_classes);
  model.encoder().set_lora_enabled(false);
  result.stripped_accuracy = class_averaged_accuracy(model_predictor(model), test, all_classes);
  model.encoder().set_lora_enabled(true);
  return result;
}

}  // namespace pfgt
