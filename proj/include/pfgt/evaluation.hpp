#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pfgt/data.hpp"
#include "pfgt/model.hpp"

namespace pfgt {

// Partition of the label set into forgotten and retained classes.
struct ForgetScenario {
  std::vector<int> forget_set;  // ascending
  std::vector<int> retain_set;  // ascending

  static ForgetScenario from_forget(std::vector<int> forget, int num_classes);
};

// Anything that maps an image to a predicted class. Evaluation metrics take
// predictors so they can be checked against hand-counted oracles.
using Predictor = std::function<int(const Tensor&)>;

Predictor model_predictor(const Model& model);

// Mean over the listed classes of per-class accuracy (exact counts).
double class_averaged_accuracy(const Predictor& predict, const Dataset& data,
                               const std::vector<int>& classes);

// Eq.-style retain / forget accuracy in percent. Both measure the model as
// given; prompt removal is the caller's move.
double retain_accuracy(const Model& model, const Dataset& test, const ForgetScenario& scenario);
double forget_accuracy(const Model& model, const Dataset& test, const ForgetScenario& scenario);

// Mean KL(softmax(logits) || uniform) over samples of the given classes.
double mean_kl_to_uniform(const Model& model, const Dataset& test,
                          const std::vector<int>& classes);

struct CombinationRow {
  std::vector<int> forget_set;
  double acc_r = 0.0;
  double acc_f = 0.0;
};

struct EvalReport {
  int f = 0;
  int n_combinations = 0;
  double acc_r_mean = 0.0, acc_r_std = 0.0;
  double acc_f_mean = 0.0, acc_f_std = 0.0;
  std::vector<CombinationRow> rows;
};

// Evaluates every f-subset of classes (or `max_combinations` seeded random
// distinct subsets when there are more). Per combination: restore all
// prompts, remove the subset, measure, then put the original mask back.
EvalReport scenario_sweep(Model& model, const Dataset& test, int f, std::uint64_t seed,
                          int max_combinations = 64, int per_class_cap = 0);

struct TraceRow {
  int batch = 0;
  std::string group;
  double accuracy = 0.0;  // percent
  int n = 0;
};

struct SequentialSchedule {
  // batch index -> classes whose prompts are removed before that batch
  std::map<int, std::vector<int>> removals;
};

// Streams stratified test batches, applying scheduled removals between
// batches. Emits one row per (batch, group): "retain" pools the classes the
// schedule never touches; each scheduled class gets its own "class<c>" group.
std::vector<TraceRow> sequential_inference(Model& model, const Dataset& test,
                                           const SequentialSchedule& schedule, int num_batches,
                                           int per_class_per_batch, std::uint64_t seed);

struct MiaReport {
  double advantage = 0.0;  // max(0, 2*(balanced_accuracy - 0.5)) * 100
  double balanced_accuracy = 0.5;
  double threshold = 0.0;
  bool member_above = true;  // attack direction fitted on the attacker split
  double member_mean = 0.0, nonmember_mean = 0.0;
  std::size_t n_member = 0, n_nonmember = 0;
};

// Threshold attack on confidence scores. The attacker fits the threshold
// (and direction) on one half of each set, balanced accuracy is measured on
// the held-out halves.
MiaReport mia_from_scores(const std::vector<double>& member_scores,
                          const std::vector<double>& nonmember_scores);

// Max-softmax confidences of samples whose labels lie in target_classes.
std::vector<double> confidence_scores(const Model& model, const Dataset& data,
                                      const std::vector<int>& target_classes);

// Confidence-based membership inference against the model as given (the
// unlearning protocol removes the target prompts first).
MiaReport mia_attack(const Model& model, const Dataset& member_set, const Dataset& nonmember_set,
                     const std::vector<int>& target_classes);

struct JailbreakResult {
  double intact_accuracy = 0.0;    // percent, all classes
  double stripped_accuracy = 0.0;  // after strip_lora
};

// Overall accuracy with LoRA intact vs stripped; LoRA is re-enabled after.
JailbreakResult jailbreak_eval(Model& model, const Dataset& test);

}  // namespace pfgt
