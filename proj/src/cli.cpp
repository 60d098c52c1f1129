#include "pfgt/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pfgt/checkpoint.hpp"
#include "pfgt/config.hpp"
#include "pfgt/evaluation.hpp"
#include "pfgt/plot.hpp"
#include "pfgt/threads.hpp"
#include "pfgt/training.hpp"

namespace pfgt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated integer list: " + s);
  return out;
}

// "10:1,2;20:4" -> {10: [1,2], 20: [4]}
SequentialSchedule parse_schedule(const std::string& s) {
  SequentialSchedule schedule;
  std::stringstream ss(s);
  std::string event;
  while (std::getline(ss, event, ';')) {
    if (event.empty()) continue;
    const auto colon = event.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("schedule event \"" + event + "\" must look like batch:classes");
    }
    schedule.removals[std::stoi(event.substr(0, colon))] =
        parse_int_list(event.substr(colon + 1));
  }
  if (schedule.removals.empty()) throw std::invalid_argument("empty removal schedule: " + s);
  return schedule;
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// Captures the effective config + subcommand invocation for replay.
void capture_run(const RunConfig& cfg, const std::string& subcommand, const json& args) {
  ensure_dir(cfg.out_dir);
  save_run_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());
  json cmd;
  cmd["subcommand"] = subcommand;
  cmd["args"] = args;
  std::ofstream os(fs::path(cfg.out_dir) / "command.json");
  os << cmd.dump(2) << '\n';
}

struct LoadedRun {
  RunConfig cfg;
  std::unique_ptr<Model> model;
  SplitDatasets data;
};

// Checkpoint plus its run config (default: config.json beside the file).
LoadedRun load_run(const std::string& checkpoint, std::string config_path, bool want_data = true) {
  if (config_path.empty()) {
    config_path = (fs::path(checkpoint).parent_path() / "config.json").string();
  }
  LoadedRun run;
  run.cfg = load_run_config(config_path);
  run.model = load_checkpoint(checkpoint);
  if (want_data) run.data = build_datasets(run.cfg);
  return run;
}

void write_kv(std::ostream& os, const MiaReport& r) {
  os << "advantage=" << r.advantage << '\n'
     << "balanced_accuracy=" << r.balanced_accuracy << '\n'
     << "threshold=" << r.threshold << '\n'
     << "direction=" << (r.member_above ? "member_above" : "member_below") << '\n'
     << "member_mean=" << r.member_mean << '\n'
     << "nonmember_mean=" << r.nonmember_mean << '\n'
     << "n_member=" << r.n_member << '\n'
     << "n_nonmember=" << r.n_nonmember << '\n';
}

std::string join_ints(const std::vector<int>& v, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_override, int epochs_override, double lambda_override,
              int fk_flag) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.train.seed = cfg.seed;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (epochs_override > 0) cfg.train.epochs = epochs_override;
  if (lambda_override >= 0.0) cfg.train.lambda = lambda_override;
  if (fk_flag) {
    cfg.train.full_knowledge = true;
    cfg.train.normalize();
  }
  cfg.validate();
  capture_run(cfg, "train", {{"config", config_path}});

  const auto data = build_datasets(cfg);
  Model model(cfg.encoder, cfg.seed);
  Trainer trainer(model, cfg.train);
  trainer.on_epoch = [&](int epoch, double learn, double unlearn) {
    std::cerr << "epoch " << (epoch + 1) << "/" << cfg.train.epochs << " learn=" << learn
              << " unlearn=" << unlearn << '\n';
  };
  const auto log = trainer.fit(data.train);

  const auto out = fs::path(cfg.out_dir);
  write_loss_log_csv(log, (out / "loss_log.csv").string());
  const std::string ckpt = (out / "model.pfgt").string();
  save_checkpoint(model, ckpt);

  const auto& last = log.back();
  std::cout << "trained " << cfg.train.epochs << " epochs on " << data.train.size()
            << " samples\n"
            << "final batch loss: learn=" << last.learn_term << " unlearn=" << last.unlearn_term
            << " total=" << last.total << '\n'
            << "checkpoint: " << ckpt << " (digest " << std::hex << file_digest(ckpt) << std::dec
            << ")\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, bool renormalized,
             std::string out_dir) {
  auto run = load_run(checkpoint, config_path);
  if (out_dir.empty()) out_dir = run.cfg.out_dir;
  ensure_dir(out_dir);

  const Model& model = *run.model;
  const Predictor predict =
      renormalized ? Predictor([&](const Tensor& im) { return model.predict_active_only(im); })
                   : model_predictor(model);

  std::ofstream csv(fs::path(out_dir) / "eval.csv");
  csv << "metric,class,value,n\n";
  double overall_sum = 0.0;
  const int k = model.pool().num_classes();
  for (int c = 0; c < k; ++c) {
    const double acc = class_averaged_accuracy(predict, run.data.test, {c});
    const auto n = run.data.test.indices_of_class(c).size();
    csv << "class_accuracy," << c << ',' << acc << ',' << n << '\n';
    std::cout << "class " << c << (model.pool().is_active(c) ? "         " : " (FORGOT) ")
              << "accuracy " << acc << "%\n";
    overall_sum += acc;
  }
  csv << "overall,," << overall_sum / k << ',' << run.data.test.size() << '\n';
  std::cout << "overall class-averaged accuracy: " << overall_sum / k << "%\n";

  std::vector<int> inactive;
  for (int c = 0; c < k; ++c) {
    if (!model.pool().is_active(c)) inactive.push_back(c);
  }
  if (!inactive.empty() && static_cast<int>(inactive.size()) < k) {
    const auto scenario = ForgetScenario::from_forget(inactive, k);
    const double acc_r = retain_accuracy(model, run.data.test, scenario);
    const double acc_f = forget_accuracy(model, run.data.test, scenario);
    csv << "acc_r,," << acc_r << ',' << scenario.retain_set.size() << '\n';
    csv << "acc_f,," << acc_f << ',' << scenario.forget_set.size() << '\n';
    std::cout << "Acc_r=" << acc_r << "%  Acc_f=" << acc_f << "%\n";
  }
  return 0;
}

int cmd_forget(const std::string& checkpoint, const std::string& classes_str, bool purge,
               std::string out_path) {
  auto model = load_checkpoint(checkpoint);
  if (out_path.empty()) out_path = checkpoint;
  for (int c : parse_int_list(classes_str)) {
    if (purge) {
      model->pool().purge_prompt(c);
      std::cout << "purged class " << c << '\n';
    } else if (model->pool().remove_prompt(c)) {
      std::cout << "removed prompt of class " << c << '\n';
    } else {
      std::cerr << "warning: class " << c << " was already inactive\n";
    }
  }
  save_checkpoint(*model, out_path);
  std::cout << "active classes now: " << join_ints(model->pool().active_ids(), ',') << '\n'
            << "saved " << out_path << '\n';
  return 0;
}

int cmd_sweep(const std::string& checkpoint, const std::string& config_path,
              const std::string& f_list, int cap, std::string out_dir) {
  auto run = load_run(checkpoint, config_path);
  if (out_dir.empty()) out_dir = run.cfg.out_dir;
  ensure_dir(out_dir);
  const int k = run.model->pool().num_classes();

  std::vector<int> fs_values;
  if (f_list.empty()) {
    fs_values = {1, (k + 1) / 2, k - 1};
  } else {
    fs_values = parse_int_list(f_list);
  }

  std::ofstream summary(fs::path(out_dir) / "sweep.csv");
  summary << "f,n_combinations,acc_r_mean,acc_r_std,acc_f_mean,acc_f_std\n";
  std::ofstream combos(fs::path(out_dir) / "sweep_combinations.csv");
  combos << "f,forget_set,acc_r,acc_f\n";
  for (int f : fs_values) {
    const auto report = scenario_sweep(*run.model, run.data.test, f, run.cfg.seed, 64, cap);
    summary << report.f << ',' << report.n_combinations << ',' << report.acc_r_mean << ','
            << report.acc_r_std << ',' << report.acc_f_mean << ',' << report.acc_f_std << '\n';
    for (const auto& row : report.rows) {
      combos << report.f << ',' << join_ints(row.forget_set) << ',' << row.acc_r << ','
             << row.acc_f << '\n';
    }
    std::cout << "f=" << report.f << " over " << report.n_combinations
              << " combinations: Acc_r=" << report.acc_r_mean << "±" << report.acc_r_std
              << "%  Acc_f=" << report.acc_f_mean << "±" << report.acc_f_std << "%\n";
  }
  return 0;
}

int cmd_sequential(const std::string& checkpoint, const std::string& config_path,
                   const std::string& schedule_str, int batches, int per_class,
                   std::string out_dir) {
  auto run = load_run(checkpoint, config_path);
  if (out_dir.empty()) out_dir = run.cfg.out_dir;
  ensure_dir(out_dir);

  const auto schedule = parse_schedule(schedule_str);
  const auto before = Adam::total_step_count();
  const auto rows =
      sequential_inference(*run.model, run.data.test, schedule, batches, per_class, run.cfg.seed);
  if (Adam::total_step_count() != before) {
    throw std::logic_error("sequential inference must never trigger optimizer steps");
  }

  std::ofstream csv(fs::path(out_dir) / "trace.csv");
  csv << "batch,group,accuracy,n\n";
  for (const auto& r : rows) {
    csv << r.batch << ',' << r.group << ',' << r.accuracy << ',' << r.n << '\n';
  }

  json sj;
  for (const auto& [batch, classes] : schedule.removals) {
    sj["removals"][std::to_string(batch)] = classes;
  }
  std::ofstream sfile(fs::path(out_dir) / "schedule.json");
  sfile << sj.dump(2) << '\n';

  std::cout << "streamed " << batches << " batches; trace written to "
            << (fs::path(out_dir) / "trace.csv").string() << '\n';
  return 0;
}

int cmd_mia(const std::string& checkpoint, const std::string& config_path, int retain_class,
            int cap, std::string out_dir) {
  auto run = load_run(checkpoint, config_path);
  if (out_dir.empty()) out_dir = run.cfg.out_dir;
  ensure_dir(out_dir);
  Model& model = *run.model;
  const int k = model.pool().num_classes();
  if (retain_class < 0 || retain_class >= k) {
    throw std::invalid_argument("mia: retain class out of range");
  }

  // The f = C-1 protocol: every class except one is forgotten, then the
  // attacker probes the forgotten classes.
  std::vector<int> targets;
  for (int c = 0; c < k; ++c) {
    if (c != retain_class) {
      targets.push_back(c);
      model.pool().remove_prompt(c);
    }
  }
  const Dataset members = filter_classes(run.data.train, targets, cap);
  const Dataset nonmembers = filter_classes(run.data.test, targets, cap);
  const auto report = mia_attack(model, members, nonmembers, targets);

  std::ofstream txt(fs::path(out_dir) / "mia.txt");
  write_kv(txt, report);
  std::ofstream csv(fs::path(out_dir) / "mia.csv");
  csv << "advantage,balanced_accuracy,threshold,member_above,member_mean,nonmember_mean,n_member,"
         "n_nonmember\n";
  csv << report.advantage << ',' << report.balanced_accuracy << ',' << report.threshold << ','
      << (report.member_above ? 1 : 0) << ',' << report.member_mean << ','
      << report.nonmember_mean << ',' << report.n_member << ',' << report.n_nonmember << '\n';
  write_kv(std::cout, report);
  return 0;
}

int cmd_jailbreak(const std::string& checkpoint, const std::string& config_path,
                  std::string out_dir) {
  auto run = load_run(checkpoint, config_path);
  if (out_dir.empty()) out_dir = run.cfg.out_dir;
  ensure_dir(out_dir);
  const auto result = jailbreak_eval(*run.model, run.data.test);
  std::ofstream csv(fs::path(out_dir) / "jailbreak.csv");
  csv << "intact_accuracy,stripped_accuracy\n";
  csv << result.intact_accuracy << ',' << result.stripped_accuracy << '\n';
  std::cout << "accuracy with LoRA: " << result.intact_accuracy << "%\n"
            << "accuracy stripped:  " << result.stripped_accuracy << "%\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& seeds_str,
               const std::string& f_list, int cap, const std::string& out_override) {
  RunConfig base = load_run_config(config_path);
  if (!out_override.empty()) base.out_dir = out_override;
  capture_run(base, "ablate", {{"config", config_path}, {"seeds", seeds_str}});

  std::vector<int> seeds = seeds_str.empty() ? std::vector<int>{static_cast<int>(base.seed)}
                                             : parse_int_list(seeds_str);
  const int k = base.encoder.num_classes;
  std::vector<int> fs_values =
      f_list.empty() ? std::vector<int>{1, (k + 1) / 2, k - 1} : parse_int_list(f_list);

  struct Variant {
    const char* name;
    AblationConfig ablation;
  };
  const Variant variants[] = {
      {"kl_only", {true, false, false}},
      {"kl_shuffle", {true, true, false}},
      {"full", {true, true, true}},
  };

  std::ofstream csv(fs::path(base.out_dir) / "ablate.csv");
  csv << "variant,f,acc_r,acc_f\n";
  for (const auto& variant : variants) {
    std::map<int, std::vector<double>> accs_r, accs_f;
    for (int seed : seeds) {
      RunConfig cfg = base;
      cfg.seed = static_cast<std::uint64_t>(seed);
      cfg.train.seed = cfg.seed;
      cfg.train.ablation = variant.ablation;
      cfg.train.full_knowledge = false;

      const auto data = build_datasets(cfg);
      Model model(cfg.encoder, cfg.seed);
      Trainer trainer(model, cfg.train);
      trainer.fit(data.train);
      for (int f : fs_values) {
        const auto report = scenario_sweep(model, data.test, f, cfg.seed, 64, cap);
        accs_r[f].push_back(report.acc_r_mean);
        accs_f[f].push_back(report.acc_f_mean);
      }
      std::cout << "variant " << variant.name << " seed " << seed << " done\n";
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    double row_r = 0.0, row_f = 0.0;
    for (int f : fs_values) {
      csv << variant.name << ',' << f << ',' << mean(accs_r[f]) << ',' << mean(accs_f[f]) << '\n';
      row_r += mean(accs_r[f]);
      row_f += mean(accs_f[f]);
    }
    csv << variant.name << ",mean," << row_r / fs_values.size() << ',' << row_f / fs_values.size()
        << '\n';
  }
  std::cout << "ablation table written to " << (fs::path(base.out_dir) / "ablate.csv").string()
            << '\n';
  return 0;
}

int cmd_plot(const std::string& trace_path, std::string schedule_path, std::string out_path,
             int window) {
  std::ifstream is(trace_path);
  if (!is) throw std::runtime_error("plot: cannot open " + trace_path);
  std::string line;
  if (!std::getline(is, line) || line != "batch,group,accuracy,n") {
    throw std::runtime_error("plot: " + trace_path + " is not a trace CSV");
  }
  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string batch, group, acc, n;
    std::getline(ss, batch, ',');
    std::getline(ss, group, ',');
    std::getline(ss, acc, ',');
    std::getline(ss, n, ',');
    rows.push_back({std::stoi(batch), group, std::stod(acc), std::stoi(n)});
  }

  if (schedule_path.empty()) {
    const auto sibling = fs::path(trace_path).parent_path() / "schedule.json";
    if (fs::exists(sibling)) schedule_path = sibling.string();
  }
  std::vector<std::pair<int, std::string>> events;
  if (!schedule_path.empty()) {
    std::ifstream sf(schedule_path);
    if (!sf) throw std::runtime_error("plot: cannot open " + schedule_path);
    json sj = json::parse(sf);
    for (const auto& [batch, classes] : sj.at("removals").items()) {
      std::string label = "forget";
      for (const auto& c : classes) label += " " + std::to_string(c.get<int>());
      events.emplace_back(std::stoi(batch), label);
    }
  }
  if (out_path.empty()) {
    out_path = (fs::path(trace_path).parent_path() / "trace.svg").string();
  }
  TracePlotOptions options;
  options.window = window;
  render_trace_svg(rows, events, out_path, options);
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_export_idx(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = load_run_config(config_path);
  if (cfg.data.use_idx) {
    throw std::invalid_argument("export-idx: config already uses idx data");
  }
  ensure_dir(out_dir);
  const auto data = build_datasets(cfg);
  const fs::path out(out_dir);
  save_idx(data.train, (out / "train-images-idx3-ubyte").string(),
           (out / "train-labels-idx1-ubyte").string());
  save_idx(data.val, (out / "val-images-idx3-ubyte").string(),
           (out / "val-labels-idx1-ubyte").string());
  save_idx(data.test, (out / "test-images-idx3-ubyte").string(),
           (out / "test-labels-idx1-ubyte").string());
  std::cout << "exported " << data.train.size() << "/" << data.val.size() << "/"
            << data.test.size() << " train/val/test samples to " << out_dir << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  configure_threads();
  CLI::App app{"prompt-gated classifier with built-in class unlearning"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, out_dir, classes_str, f_list, schedule_str, seeds_str;
  std::string trace_path, schedule_path;
  std::int64_t seed_override = -1;
  int epochs_override = -1, retain_class = 0, cap = 0, batches = 30, per_class = 20, window = 5;
  double lambda_override = -1.0;
  bool purge = false, renormalized = false, full_knowledge = false;

  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed_override, "override the top-level seed");
  train->add_option("--out", out_dir, "override the output directory");
  train->add_option("--epochs", epochs_override, "override epoch count");
  train->add_option("--lambda", lambda_override, "override the unlearning weight");
  train->add_flag("--full-knowledge", full_knowledge, "train the cross-entropy-only baseline");

  auto* eval = app.add_subcommand("eval", "per-class and retain/forget accuracy");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--config", config_path, "run config (default: beside the checkpoint)");
  eval->add_flag("--renormalized", renormalized, "argmax over active classes only");
  eval->add_option("--out", out_dir);

  auto* forget = app.add_subcommand("forget", "remove (or purge) class prompts and re-save");
  forget->add_option("--checkpoint", checkpoint)->required();
  forget->add_option("--classes", classes_str, "comma-separated class ids")->required();
  forget->add_flag("--purge", purge, "irreversibly zero the stored blocks");
  forget->add_option("--out", out_dir, "output checkpoint path (default: in place)");

  auto* sweep = app.add_subcommand("sweep", "forgetting-scenario sweep over class subsets");
  sweep->add_option("--checkpoint", checkpoint)->required();
  sweep->add_option("--config", config_path);
  sweep->add_option("--f", f_list, "comma-separated forget counts (default 1,ceil(K/2),K-1)");
  sweep->add_option("--cap", cap, "test samples per class per combination (0 = all)");
  sweep->add_option("--out", out_dir);

  auto* sequential = app.add_subcommand("sequential", "streamed inference with scheduled removals");
  sequential->add_option("--checkpoint", checkpoint)->required();
  sequential->add_option("--config", config_path);
  sequential->add_option("--schedule", schedule_str, "e.g. \"10:1;20:4\"")->required();
  sequential->add_option("--batches", batches);
  sequential->add_option("--per-class", per_class, "samples per class per batch");
  sequential->add_option("--out", out_dir);

  auto* mia = app.add_subcommand("mia", "confidence membership-inference attack (f=C-1)");
  mia->add_option("--checkpoint", checkpoint)->required();
  mia->add_option("--config", config_path);
  mia->add_option("--retain-class", retain_class, "the single class kept active");
  mia->add_option("--cap", cap, "cap members/nonmembers per class (0 = all)");
  mia->add_option("--out", out_dir);

  auto* jailbreak = app.add_subcommand("jailbreak", "accuracy with LoRA intact vs stripped");
  jailbreak->add_option("--checkpoint", checkpoint)->required();
  jailbreak->add_option("--config", config_path);
  jailbreak->add_option("--out", out_dir);

  auto* ablate = app.add_subcommand("ablate", "KL-only / +shuffle / +sampling table");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--seeds", seeds_str, "comma-separated seeds (default: config seed)");
  ablate->add_option("--f", f_list);
  ablate->add_option("--cap", cap);
  ablate->add_option("--out", out_dir);

  auto* plot = app.add_subcommand("plot", "render a trace CSV as an SVG chart");
  plot->add_option("--trace", trace_path)->required();
  plot->add_option("--schedule", schedule_path, "schedule JSON (default: beside the trace)");
  plot->add_option("--out", out_dir);
  plot->add_option("--window", window, "moving-average window");

  auto* export_idx = app.add_subcommand("export-idx", "write the synthetic dataset as IDX files");
  export_idx->add_option("--config", config_path)->required();
  export_idx->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) {
      return cmd_train(config_path, seed_override, out_dir, epochs_override, lambda_override,
                       full_knowledge);
    }
    if (eval->parsed()) return cmd_eval(checkpoint, config_path, renormalized, out_dir);
    if (forget->parsed()) return cmd_forget(checkpoint, classes_str, purge, out_dir);
    if (sweep->parsed()) return cmd_sweep(checkpoint, config_path, f_list, cap, out_dir);
    if (sequential->parsed()) {
      return cmd_sequential(checkpoint, config_path, schedule_str, batches, per_class, out_dir);
    }
    if (mia->parsed()) return cmd_mia(checkpoint, config_path, retain_class, cap, out_dir);
    if (jailbreak->parsed()) return cmd_jailbreak(checkpoint, config_path, out_dir);
    if (ablate->parsed()) return cmd_ablate(config_path, seeds_str, f_list, cap, out_dir);
    if (plot->parsed()) return cmd_plot(trace_path, schedule_path, out_dir, window);
    if (export_idx->parsed()) return cmd_export_idx(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pfgt
