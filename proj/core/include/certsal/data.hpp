#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace certsal {

// Feature vectors column-per-sample plus labels. Image-shaped datasets carry
// their geometry; norm_mean/norm_std record the [0,1]-scale statistics behind
// the standardization so pixels can be reconstructed exactly.
struct Dataset {
  Eigen::MatrixXd inputs;  // dim x count
  std::vector<int> labels;
  int rows = 0;
  int cols = 0;
  double norm_mean = 0.0;
  double norm_std = 1.0;
  double box_lo = -std::numeric_limits<double>::infinity();
  double box_hi = std::numeric_limits<double>::infinity();

  long size() const { return inputs.cols(); }
  int dim() const { return static_cast<int>(inputs.rows()); }
  void validate() const;
};

// IDX (big-endian) image/label pair. Pixels are mapped to [0,1] and then
// standardized to mean 0, std 1 over the file; box_lo/box_hi are set to the
// standardized images of 0 and 1.
// Throws std::runtime_error naming the byte offset on bad magic or truncation.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_idx: un-standardizes, maps back to bytes and writes the
// IDX pair. Values outside [0,1] after un-standardization are clamped.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// Block-mean pooling by `factor` along both image axes.
// Throws std::invalid_argument when the image sides are not divisible.
Dataset downsample(const Dataset& ds, int factor);

// Gaussian blobs (unit per-coordinate std) at deterministic class centers
// separated by at least `separation`.
Dataset synth_blobs(int classes, int samples_per_class, int dims, double separation,
                    std::uint64_t seed);

// Re-centers and rescales features to mean 0, std 1 overall; updates the
// normalization metadata and box bounds accordingly.
void standardize(Dataset& ds);

// Dataset cache directory: $CERTSAL_CACHE_DIR if set, else ./certsal_cache.
std::string cache_dir();

}  // namespace certsal
