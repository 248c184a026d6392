#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "certsal/attack.hpp"
#include "certsal/nn.hpp"
#include "certsal/numerics.hpp"
#include "certsal/smoothing.hpp"

namespace certsal {

// Flat key = value configuration file: one pair per line, '#' comments,
// whitespace-insensitive. Unknown keys are rejected by the commands so typos
// cannot silently change an experiment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws if missing
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  // Throws listing any key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class DatasetKind { blobs, idx };

// Everything a command run needs, resolved from the config file plus CLI
// overrides. q and sigma live in one place so the smoothing and the
// certificate parameters cannot drift apart.
struct ExperimentConfig {
  std::string out_dir = "certsal_out";
  std::uint64_t seed = 1;
  bool quiet = false;

  std::string model_path;

  DatasetKind dataset_kind = DatasetKind::blobs;
  int blobs_classes = 10;
  int blobs_per_class = 200;
  int blobs_dims = 64;
  double blobs_separation = 6.0;
  int blobs_label_folds = 1;  // >1 remaps c -> c % (classes/folds): multimodal classes
  std::string idx_images, idx_labels;
  int idx_downsample = 1;
  long input_count = 20;  // how many held-out inputs certify/attack touch

  std::vector<int> hidden_sizes = {256, 128};
  double beta = 1.0;
  TrainConfig train;

  std::vector<Transform> transforms = {Transform::sparsified};
  SparsifyParams sparsify{0.25, 0.01};

  double sigma = 0.2;
  long q = 4096;

  double rho = 0.05;
  double p_bound = 0.95;
  int k = 0;  // 0 = n/4

  AttackConfig attack;

  // Parses, applies overrides, validates ranges and key names.
  static ExperimentConfig load(const std::string& config_path,
                               const std::optional<std::uint64_t>& seed_override,
                               const std::optional<std::string>& out_override, bool quiet);

  SmoothingConfig smoothing_config(std::uint64_t stream) const;
  CertificateParams certificate_params(long n) const;
};

}  // namespace certsal
