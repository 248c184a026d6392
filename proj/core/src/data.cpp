#include "certsal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "certsal/rng.hpp"

namespace certsal {

void Dataset::validate() const {
  if (static_cast<long>(labels.size()) != inputs.cols()) {
    throw std::invalid_argument("Dataset: inputs and labels length mismatch");
  }
  if (rows > 0 && cols > 0 && rows * cols != dim()) {
    throw std::invalid_argument("Dataset: image geometry does not match dimension");
  }
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path, long offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw std::runtime_error(path + ": truncated at byte offset " + std::to_string(offset));
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path);
  const std::uint32_t magic = read_be32(img, images_path, 0);
  if (magic != kImagesMagic) {
    throw std::runtime_error(images_path + ": bad image magic at byte offset 0 (got 0x" +
                             std::to_string(magic) + ", want 2051)");
  }
  const std::uint32_t count = read_be32(img, images_path, 4);
  const std::uint32_t rows = read_be32(img, images_path, 8);
  const std::uint32_t cols = read_be32(img, images_path, 12);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path);
  const std::uint32_t lmagic = read_be32(lab, labels_path, 0);
  if (lmagic != kLabelsMagic) {
    throw std::runtime_error(labels_path + ": bad label magic at byte offset 0 (got 0x" +
                             std::to_string(lmagic) + ", want 2049)");
  }
  const std::uint32_t lcount = read_be32(lab, labels_path, 4);
  if (lcount != count) {
    throw std::runtime_error("image/label count mismatch: " + std::to_string(count) + " vs " +
                             std::to_string(lcount));
  }

  Dataset ds;
  ds.rows = static_cast<int>(rows);
  ds.cols = static_cast<int>(cols);
  const long dim = static_cast<long>(rows) * cols;
  ds.inputs.resize(dim, count);
  ds.labels.resize(count);

  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), dim);
    if (!img) {
      throw std::runtime_error(images_path + ": truncated at byte offset " +
                               std::to_string(16 + static_cast<long>(i) * dim));
    }
    for (long j = 0; j < dim; ++j) ds.inputs(j, i) = buf[j] / 255.0;
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    char c;
    lab.read(&c, 1);
    if (!lab) {
      throw std::runtime_error(labels_path + ": truncated at byte offset " +
                               std::to_string(8 + static_cast<long>(i)));
    }
    ds.labels[i] = static_cast<unsigned char>(c);
  }

  ds.box_lo = 0.0;
  ds.box_hi = 1.0;
  standardize(ds);
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  ds.validate();
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path + " for writing");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(ds.rows));
  write_be32(img, static_cast<std::uint32_t>(ds.cols));
  const long dim = ds.dim();
  std::vector<unsigned char> buf(dim);
  for (long i = 0; i < ds.size(); ++i) {
    for (long j = 0; j < dim; ++j) {
      const double unit = ds.inputs(j, i) * ds.norm_std + ds.norm_mean;
      const double byte = std::clamp(unit, 0.0, 1.0) * 255.0;
      buf[j] = static_cast<unsigned char>(std::lround(byte));
    }
    img.write(reinterpret_cast<char*>(buf.data()), dim);
  }

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path + " for writing");
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (long i = 0; i < ds.size(); ++i) {
    const char c = static_cast<char>(ds.labels[i]);
    lab.write(&c, 1);
  }
}

Dataset downsample(const Dataset& ds, int factor) {
  ds.validate();
  if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
  if (ds.rows % factor != 0 || ds.cols % factor != 0) {
    throw std::invalid_argument("downsample: image sides " + std::to_string(ds.rows) + "x" +
                                std::to_string(ds.cols) + " not divisible by " +
                                std::to_string(factor));
  }
  Dataset out = ds;
  out.rows = ds.rows / factor;
  out.cols = ds.cols / factor;
  out.inputs.resize(static_cast<long>(out.rows) * out.cols, ds.size());
  const double inv = 1.0 / (factor * factor);
  for (long i = 0; i < ds.size(); ++i) {
    for (int r = 0; r < out.rows; ++r) {
      for (int c = 0; c < out.cols; ++c) {
        double acc = 0.0;
        for (int dr = 0; dr < factor; ++dr) {
          for (int dc = 0; dc < factor; ++dc) {
            acc += ds.inputs((r * factor + dr) * ds.cols + (c * factor + dc), i);
          }
        }
        out.inputs(static_cast<long>(r) * out.cols + c, i) = acc * inv;
      }
    }
  }
  return out;
}

Dataset synth_blobs(int classes, int samples_per_class, int dims, double separation,
                    std::uint64_t seed) {
  if (classes < 1 || dims < 1) throw std::invalid_argument("synth_blobs: bad shape");
  if (!(separation > 0.0)) throw std::invalid_argument("synth_blobs: separation must be > 0");

  // Deterministic centers: random directions, redrawn until pairwise
  // separation holds, then scaled so the closest pair is exactly `separation`
  // apart.
  Eigen::MatrixXd centers(dims, classes);
  GaussianStream center_rng(mix_seed(seed, 0));
  for (int attempt = 0;; ++attempt) {
    for (int c = 0; c < classes; ++c) {
      Eigen::VectorXd dir(dims);
      for (int j = 0; j < dims; ++j) dir[j] = center_rng.next();
      const double norm = dir.norm();
      centers.col(c) = (norm > 0) ? Eigen::VectorXd(dir / norm) : Eigen::VectorXd::Unit(dims, 0);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        min_dist = std::min(min_dist, (centers.col(a) - centers.col(b)).norm());
      }
    }
    if (classes == 1 || min_dist > 0.2) {
      if (classes > 1) centers *= separation / min_dist;
      break;
    }
    if (attempt > 1000) throw std::runtime_error("synth_blobs: failed to place centers");
  }

  Dataset ds;
  const long total = static_cast<long>(classes) * samples_per_class;
  ds.inputs.resize(dims, total);
  ds.labels.resize(total);
  long idx = 0;
  for (int c = 0; c < classes; ++c) {
    GaussianStream rng(mix_seed(seed, 1 + c));
    for (int s = 0; s < samples_per_class; ++s, ++idx) {
      for (int j = 0; j < dims; ++j) ds.inputs(j, idx) = centers(j, c) + rng.next();
      ds.labels[idx] = c;
    }
  }
  return ds;
}

void standardize(Dataset& ds) {
  const long total = ds.inputs.size();
  if (total == 0) return;
  const double mean = ds.inputs.mean();
  const double var = (ds.inputs.array() - mean).square().sum() / total;
  const double std = std::sqrt(var);
  if (!(std > 0.0)) return;  // constant data; leave as-is
  ds.inputs = (ds.inputs.array() - mean) / std;
  // Compose with any standardization already applied so that [0,1]-scale
  // pixels remain reconstructible: unit = v*new_std + new_mean.
  ds.norm_mean = ds.norm_mean + mean * ds.norm_std;
  ds.norm_std = ds.norm_std * std;
  if (std::isfinite(ds.box_lo)) ds.box_lo = (ds.box_lo - mean) / std;
  if (std::isfinite(ds.box_hi)) ds.box_hi = (ds.box_hi - mean) / std;
}

std::string cache_dir() {
  if (const char* env = std::getenv("CERTSAL_CACHE_DIR")) return env;
  return "certsal_cache";
}

}  // namespace certsal
