#include "pfgt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pfgt {

Tensor Dataset::image(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("Dataset::image: index out of range");
  const std::size_t n = static_cast<std::size_t>(image_size) * image_size;
  auto t = Tensor::zeros({image_size, image_size});
  std::copy(pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
            pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), t.data->begin());
  return t;
}

int Dataset::num_classes() const {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  return k;
}

std::vector<std::size_t> Dataset::indices_of_class(int c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) out.push_back(i);
  }
  return out;
}

std::vector<float> class_template(int c, int classes, int image_size) {
  const double theta = 3.14159265358979323846 * c / classes;
  const double freq = 2.0 + c;  // cycles across the image
  const double phase = 0.7 * c;
  const double cs = std::cos(theta), sn = std::sin(theta);
  std::vector<float> img(static_cast<std::size_t>(image_size) * image_size);
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double u = static_cast<double>(x) / image_size;
      const double v = static_cast<double>(y) / image_size;
      const double t = 6.283185307179586 * freq * (cs * u + sn * v) + phase;
      img[static_cast<std::size_t>(y) * image_size + x] =
          static_cast<float>(0.5 + 0.45 * std::sin(t));
    }
  }
  return img;
}

SplitDatasets generate_synthetic(const SyntheticSpec& spec, Rng rng) {
  if (spec.classes < 1 || spec.samples_per_class < 1 || spec.image_size < 1 ||
      spec.noise_std < 0.0) {
    throw std::invalid_argument("generate_synthetic: invalid spec");
  }
  const int s = spec.image_size;
  const std::size_t pix = static_cast<std::size_t>(s) * s;
  const int n_train = spec.samples_per_class * 70 / 100;
  const int n_val = spec.samples_per_class * 10 / 100;
  const int n_test = spec.samples_per_class - n_train - n_val;

  SplitDatasets out;
  for (Dataset* d : {&out.train, &out.val, &out.test}) d->image_size = s;

  for (int c = 0; c < spec.classes; ++c) {
    const auto tmpl = class_template(c, spec.classes, s);
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Dataset& dst = (i < n_train) ? out.train : (i < n_train + n_val) ? out.val : out.test;
      for (std::size_t p = 0; p < pix; ++p) {
        const double v = tmpl[p] + rng.normal(0.0, spec.noise_std);
        dst.pixels.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
      }
      dst.labels.push_back(c);
    }
  }
  (void)n_test;
  return out;
}

Dataset filter_classes(const Dataset& data, const std::vector<int>& classes, int per_class_cap) {
  Dataset out;
  out.image_size = data.image_size;
  const std::size_t pix = static_cast<std::size_t>(data.image_size) * data.image_size;
  for (int c : classes) {
    const auto idx = data.indices_of_class(c);
    std::size_t take = idx.size();
    if (per_class_cap > 0) take = std::min(take, static_cast<std::size_t>(per_class_cap));
    for (std::size_t i = 0; i < take; ++i) {
      out.pixels.insert(out.pixels.end(),
                        data.pixels.begin() + static_cast<std::ptrdiff_t>(idx[i] * pix),
                        data.pixels.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * pix));
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

void write_be_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>(v & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_be_u32(std::istream& is, const std::string& path, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("idx: " + path + ": truncated while reading " + what);
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream im(images_path, std::ios::binary);
  if (!im) throw std::runtime_error("idx: cannot open " + images_path);
  const std::uint32_t im_magic = read_be_u32(im, images_path, "magic");
  if (im_magic != kImagesMagic) {
    throw std::runtime_error("idx: " + images_path + ": bad image magic (expected 0x00000803)");
  }
  const std::uint32_t n = read_be_u32(im, images_path, "count");
  const std::uint32_t rows = read_be_u32(im, images_path, "rows");
  const std::uint32_t cols = read_be_u32(im, images_path, "cols");
  if (rows == 0 || cols == 0 || rows != cols) {
    throw std::runtime_error("idx: " + images_path + ": only square images are supported");
  }

  std::ifstream lb(labels_path, std::ios::binary);
  if (!lb) throw std::runtime_error("idx: cannot open " + labels_path);
  const std::uint32_t lb_magic = read_be_u32(lb, labels_path, "magic");
  if (lb_magic != kLabelsMagic) {
    throw std::runtime_error("idx: " + labels_path + ": bad label magic (expected 0x00000801)");
  }
  const std::uint32_t n_labels = read_be_u32(lb, labels_path, "count");
  if (n != n_labels) {
    throw std::runtime_error("idx: image count " + std::to_string(n) + " != label count " +
                             std::to_string(n_labels));
  }

  Dataset d;
  d.image_size = static_cast<int>(rows);
  const std::size_t total = static_cast<std::size_t>(n) * rows * cols;
  std::vector<unsigned char> raw(total);
  if (!im.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total))) {
    throw std::runtime_error("idx: " + images_path + ": truncated pixel data");
  }
  d.pixels.resize(total);
  for (std::size_t i = 0; i < total; ++i) d.pixels[i] = static_cast<float>(raw[i]) / 255.0f;

  std::vector<unsigned char> lraw(n);
  if (!lb.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("idx: " + labels_path + ": truncated label data");
  }
  d.labels.assign(lraw.begin(), lraw.end());
  return d;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream im(images_path, std::ios::binary);
  if (!im) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
  write_be_u32(im, kImagesMagic);
  write_be_u32(im, static_cast<std::uint32_t>(data.size()));
  write_be_u32(im, static_cast<std::uint32_t>(data.image_size));
  write_be_u32(im, static_cast<std::uint32_t>(data.image_size));
  for (float v : data.pixels) {
    const int byte = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    im.put(static_cast<char>(byte));
  }
  if (!im) throw std::runtime_error("idx: write failed for " + images_path);

  std::ofstream lb(labels_path, std::ios::binary);
  if (!lb) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
  write_be_u32(lb, kLabelsMagic);
  write_be_u32(lb, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) {
    if (l < 0 || l > 255) throw std::runtime_error("idx: label out of byte range");
    lb.put(static_cast<char>(l));
  }
  if (!lb) throw std::runtime_error("idx: write failed for " + labels_path);
}

}  // namespace pfgt
