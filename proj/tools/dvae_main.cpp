#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvae/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration")->required();
  cmd->add_option("--set", args.sets, "override a config key, e.g. --set train.lr=1e-3");
  cmd->add_option("--seed", [&args](const std::vector<std::string>& v) {
        args.seed = std::stoull(v.back());
        return true;
      },
      "override the run seed");
  cmd->add_option("--out", [&args](const std::vector<std::string>& v) {
        args.out_dir = v.back();
        return true;
      },
      "override the output directory");
  cmd->add_option("--checkpoint", [&args](const std::vector<std::string>& v) {
        args.checkpoint = v.back();
        return true;
      },
      "checkpoint path (eval/resynth/sample input, train resume)");
}

dvae::RunConfig load(const CommonArgs& args, bool checkpoint_is_resume) {
  dvae::RunConfig cfg =
      dvae::load_run_config(args.config_path, args.sets, args.seed, args.out_dir);
  if (args.checkpoint) {
    if (checkpoint_is_resume)
      cfg.resume = *args.checkpoint;
    else
      cfg.checkpoint = *args.checkpoint;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DVAE toolkit: sequence models over power spectrograms"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, resynth_args, sample_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model with early stopping");
  add_common(train_cmd, train_args);
  CLI::App* eval_cmd = app.add_subcommand("eval", "score analysis-resynthesis on the test set");
  add_common(eval_cmd, eval_args);
  CLI::App* resynth_cmd = app.add_subcommand("resynth", "write resynthesized test WAVs");
  add_common(resynth_cmd, resynth_args);
  CLI::App* sample_cmd = app.add_subcommand("sample", "write WAVs generated from the prior");
  add_common(sample_cmd, sample_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      dvae::RunConfig cfg = load(train_args, true);
      dvae::TrainArtifacts art = dvae::run_train(cfg);
      std::cout << "trained " << dvae::model_kind_to_string(cfg.model.kind) << ": epochs="
                << art.state.epoch << " best_val=" << art.state.best_val << "\n"
                << "checkpoint: " << art.best_checkpoint << "\n"
                << "log: " << art.log_path << "\n";
    } else if (eval_cmd->parsed()) {
      dvae::RunConfig cfg = load(eval_args, false);
      dvae::EvalReport report = dvae::run_eval(cfg);
      std::cout << report.to_table() << "report: " << cfg.out_dir << "/eval.jsonl\n";
    } else if (resynth_cmd->parsed()) {
      dvae::RunConfig cfg = load(resynth_args, false);
      int n = dvae::run_resynth(cfg);
      std::cout << "wrote " << n << " resyntheses to " << cfg.out_dir << "\n";
    } else if (sample_cmd->parsed()) {
      dvae::RunConfig cfg = load(sample_args, false);
      int n = dvae::run_sample(cfg);
      std::cout << "wrote " << n << " samples to " << cfg.out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
