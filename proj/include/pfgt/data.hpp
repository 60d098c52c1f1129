#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfgt/rng.hpp"
#include "pfgt/tensor.hpp"

namespace pfgt {

// Immutable labeled image set. Pixels are stored flat in [0,1].
struct Dataset {
  int image_size = 0;
  std::vector<float> pixels;  // size() * image_size * image_size
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Tensor image(std::size_t i) const;
  int label(std::size_t i) const { return labels.at(i); }
  int num_classes() const;
  std::vector<std::size_t> indices_of_class(int c) const;
};

struct SyntheticSpec {
  int classes = 6;
  int samples_per_class = 300;
  int image_size = 32;
  double noise_std = 0.25;
};

struct SplitDatasets {
  Dataset train, val, test;
};

// Deterministic class template: an oriented sinusoidal grating, distinct
// frequency and orientation per class.
std::vector<float> class_template(int c, int classes, int image_size);

// Templates plus Gaussian pixel noise, clipped to [0,1]. Splits 70/10/20
// per class, disjoint, exactly class-balanced.
SplitDatasets generate_synthetic(const SyntheticSpec& spec, Rng rng);

// Samples whose labels lie in `classes`, keeping at most per_class_cap of
// each class (0 = unlimited), in dataset order.
Dataset filter_classes(const Dataset& data, const std::vector<int>& classes,
                       int per_class_cap = 0);

// IDX binary format (big-endian magic 0x00000803 for images, 0x00000801 for
// labels). Bytes scale linearly to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

}  // namespace pfgt
