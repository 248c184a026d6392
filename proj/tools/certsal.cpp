// certsal: smoothed saliency maps with robustness certificates, plus the L2
// top-K attack to stress them. Subcommands: train, certify, attack, verify.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "certsal/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* config_opt = cmd->add_option("--config", args.config_path, "flat key=value config file");
  if (config_required) config_opt->required();
  cmd->add_option("--seed", [&args](const CLI::results_t& rs) {
    args.seed = std::stoull(rs[0]);
    return true;
  }, "seed override");
  cmd->add_option("--out", [&args](const CLI::results_t& rs) {
    args.out = rs[0];
    return true;
  }, "output directory override");
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

certsal::ExperimentConfig resolve(const CommonArgs& args) {
  if (args.config_path.empty()) {
    // verify runs fine on defaults; build a config from overrides only.
    certsal::ExperimentConfig config;
    if (args.seed) config.seed = *args.seed;
    if (args.out) config.out_dir = *args.out;
    config.quiet = args.quiet;
    return config;
  }
  return certsal::ExperimentConfig::load(args.config_path, args.seed, args.out, args.quiet);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certifiably robust smoothed saliency maps"};
  app.require_subcommand(1);

  CommonArgs train_args, certify_args, attack_args, verify_args;
  CLI::App* train = app.add_subcommand("train", "train the built-in classifier");
  add_common(train, train_args, true);
  CLI::App* certify = app.add_subcommand("certify", "smoothed saliency + certificates");
  add_common(certify, certify_args, true);
  CLI::App* attack = app.add_subcommand("attack", "L2 attack on top-K overlap");
  add_common(attack, attack_args, true);
  CLI::App* verify = app.add_subcommand("verify", "run the property suites");
  add_common(verify, verify_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return certsal::cmd::cmd_train(resolve(train_args));
    if (certify->parsed()) return certsal::cmd::cmd_certify(resolve(certify_args));
    if (attack->parsed()) return certsal::cmd::cmd_attack(resolve(attack_args));
    if (verify->parsed()) return certsal::cmd::cmd_verify(resolve(verify_args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
