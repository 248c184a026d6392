#include "certsal/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "certsal/rng.hpp"

namespace certsal {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

const std::set<std::string> kKnownKeys = {
    "out", "seed", "model",
    "dataset", "blobs.classes", "blobs.per_class", "blobs.dims", "blobs.separation",
    "blobs.label_folds", "idx.images", "idx.labels", "idx.downsample", "inputs.count",
    "train.hidden", "train.beta", "train.lr", "train.momentum", "train.epochs",
    "train.batch", "train.weight_decay",
    "provider.transform", "provider.tau", "provider.gamma",
    "smooth.sigma", "smooth.q",
    "cert.rho", "cert.p", "cert.K",
    "attack.P", "attack.Q", "attack.T", "attack.rho",
};

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    }
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not a number: '" + it->second + "'");
  }
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: '" + it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: key '" + key + "' is not a boolean: '" + it->second + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) {
    throw std::runtime_error("config: unknown keys: " + unknown);
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& config_path,
                                        const std::optional<std::uint64_t>& seed_override,
                                        const std::optional<std::string>& out_override,
                                        bool quiet) {
  KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
  kv.require_known(kKnownKeys);

  ExperimentConfig c;
  c.quiet = quiet;
  c.out_dir = out_override.value_or(kv.get_or("out", c.out_dir));
  c.seed = seed_override.value_or(static_cast<std::uint64_t>(kv.get_long("seed", 1)));
  c.model_path = kv.get_or("model", "");

  const std::string dataset = kv.get_or("dataset", "blobs");
  if (dataset == "blobs") {
    c.dataset_kind = DatasetKind::blobs;
  } else if (dataset == "idx") {
    c.dataset_kind = DatasetKind::idx;
    c.idx_images = kv.get("idx.images");
    c.idx_labels = kv.get("idx.labels");
  } else {
    throw std::runtime_error("config: dataset must be 'blobs' or 'idx', got '" + dataset + "'");
  }
  c.blobs_classes = static_cast<int>(kv.get_long("blobs.classes", c.blobs_classes));
  c.blobs_per_class = static_cast<int>(kv.get_long("blobs.per_class", c.blobs_per_class));
  c.blobs_dims = static_cast<int>(kv.get_long("blobs.dims", c.blobs_dims));
  c.blobs_separation = kv.get_double("blobs.separation", c.blobs_separation);
  c.blobs_label_folds = static_cast<int>(kv.get_long("blobs.label_folds", 1));
  c.idx_downsample = static_cast<int>(kv.get_long("idx.downsample", 1));
  c.input_count = kv.get_long("inputs.count", c.input_count);

  if (kv.has("train.hidden")) {
    c.hidden_sizes.clear();
    std::stringstream ss(kv.get("train.hidden"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) c.hidden_sizes.push_back(std::stoi(t));
    }
  }
  c.beta = kv.get_double("train.beta", c.beta);
  c.train.learning_rate = kv.get_double("train.lr", c.train.learning_rate);
  c.train.momentum = kv.get_double("train.momentum", c.train.momentum);
  c.train.epochs = static_cast<int>(kv.get_long("train.epochs", c.train.epochs));
  c.train.batch_size = static_cast<int>(kv.get_long("train.batch", c.train.batch_size));
  c.train.weight_decay = kv.get_double("train.weight_decay", c.train.weight_decay);
  c.train.seed = c.seed;

  if (kv.has("provider.transform")) {
    c.transforms.clear();
    std::stringstream ss(kv.get("provider.transform"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) c.transforms.push_back(transform_from_string(t));
    }
    if (c.transforms.empty()) throw std::runtime_error("config: provider.transform is empty");
  }
  c.sparsify.tau = kv.get_double("provider.tau", c.sparsify.tau);
  c.sparsify.gamma = kv.get_double("provider.gamma", c.sparsify.gamma);
  c.sparsify.validate();

  c.sigma = kv.get_double("smooth.sigma", c.sigma);
  c.q = kv.get_long("smooth.q", c.q);
  // q = 0 means "no smoothing" for the attack provider; certify requires q >= 1.
  if (!(c.sigma > 0.0) || c.q < 0) throw std::runtime_error("config: bad smooth.sigma / smooth.q");

  c.rho = kv.get_double("cert.rho", c.rho);
  c.p_bound = kv.get_double("cert.p", c.p_bound);
  c.k = static_cast<int>(kv.get_long("cert.K", 0));

  c.attack.inner_iters = static_cast<int>(kv.get_long("attack.P", 20));
  c.attack.sampling_budget = static_cast<int>(kv.get_long("attack.Q", 100));
  c.attack.restarts = static_cast<int>(kv.get_long("attack.T", 5));
  c.attack.rho = kv.get_double("attack.rho", c.rho);
  return c;
}

SmoothingConfig ExperimentConfig::smoothing_config(std::uint64_t stream) const {
  SmoothingConfig sc;
  sc.sigma = sigma;
  sc.q = q;
  sc.seed = mix_seed(seed, stream);
  return sc;
}

CertificateParams ExperimentConfig::certificate_params(long n) const {
  CertificateParams params;
  params.rho = rho;
  params.sigma = sigma;
  params.q = q;
  params.p = p_bound;
  params.n = n;
  params.validate();
  return params;
}

}  // namespace certsal
