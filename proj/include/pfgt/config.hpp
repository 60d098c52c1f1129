#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pfgt/data.hpp"
#include "pfgt/encoder.hpp"
#include "pfgt/training.hpp"

namespace pfgt {

struct DataConfig {
  bool use_idx = false;
  SyntheticSpec synthetic;
  std::string train_images, train_labels, test_images, test_labels;
};

// One experiment = one config file. Flags may override individual fields;
// the effective config is captured into the output directory so every run
// replays from its artifacts alone.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  EncoderConfig encoder;
  TrainConfig train;
  DataConfig data;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& c, const std::string& path);

// Materializes the configured dataset. Synthetic data flows from
// substream("data") of the run seed; IDX data is read from the named files.
SplitDatasets build_datasets(const RunConfig& c);

}  // namespace pfgt
