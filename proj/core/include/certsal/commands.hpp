#pragma once

#include "certsal/config.hpp"
#include "certsal/data.hpp"

namespace certsal::cmd {

// Subcommand entry points. Return process exit codes: 0 success, 1 for
// suite/assertion failures (verify suites, training divergence), 2 for
// usage/IO problems (the CLI maps thrown exceptions to 2).
int cmd_train(const ExperimentConfig& config);
int cmd_certify(const ExperimentConfig& config);
int cmd_attack(const ExperimentConfig& config);
int cmd_verify(const ExperimentConfig& config);

// Dataset resolution shared by the commands: blobs are generated (labels
// folded when configured), IDX files are loaded, downsampled and
// re-standardized.
Dataset resolve_dataset(const ExperimentConfig& config);

// Deterministic 80/20 split by index stride: sample i is test iff i % 5 == 4.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds);

}  // namespace certsal::cmd
