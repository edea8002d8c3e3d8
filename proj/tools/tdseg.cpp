#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "tdseg/bench.hpp"
#include "tdseg/gradcheck.hpp"
#include "tdseg/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  int seed = -1;
  std::string out_dir;
};

tdseg::RunConfig load_config(const CommonOpts& opts) {
  tdseg::require(!opts.config_path.empty(), "usage", "--config PATH is required");
  tdseg::RunConfig cfg = tdseg::parse_run_config(opts.config_path);
  if (opts.seed >= 0) {
    cfg.seed = static_cast<std::uint32_t>(opts.seed);
    cfg.gen.seed = static_cast<std::uint32_t>(opts.seed);
  }
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

std::string default_checkpoint(const tdseg::RunConfig& cfg) {
  return (fs::path(cfg.out_dir) / "checkpoint.tdc").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdseg: transform-domain UNet training and evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string split_name = "test";
  std::string checkpoint_path, manifest_path, predictions_dir;
  bool render = false;

  auto add_common = [&](CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--config", opts.config_path, "run config file");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    if (with_out) cmd->add_option("--out", opts.out_dir, "override the output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train from a config");
  add_common(train);

  CLI::App* predict = app.add_subcommand("predict", "write probability maps and masks");
  add_common(predict);
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint archive");
  predict->add_option("--manifest", manifest_path, "dataset manifest");
  predict->add_option("--split", split_name, "train|val|test")->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "micro-averaged metrics over a split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint archive");
  eval->add_option("--predictions", predictions_dir, "directory written by predict");
  eval->add_option("--manifest", manifest_path, "dataset manifest");
  eval->add_option("--split", split_name, "train|val|test")->capture_default_str();
  eval->add_flag("--render", render, "write per-sample confusion images");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seed", opts.seed, "probe seed");

  CLI::App* bench = app.add_subcommand("bench", "timing and parameter-count report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      tdseg::run_gen_data(load_config(opts), std::cout);
    } else if (train->parsed()) {
      tdseg::run_train(load_config(opts), std::cout);
    } else if (predict->parsed() || eval->parsed()) {
      std::string out_dir = opts.out_dir;
      if (!opts.config_path.empty()) {
        tdseg::RunConfig cfg = load_config(opts);
        if (manifest_path.empty()) manifest_path = cfg.manifest_path;
        if (checkpoint_path.empty() && predictions_dir.empty())
          checkpoint_path = default_checkpoint(cfg);
        if (out_dir.empty())
          out_dir = (fs::path(cfg.out_dir) / (predict->parsed() ? "predictions" : "eval"))
                        .string();
      }
      tdseg::require(!manifest_path.empty(), "usage",
                     "need --manifest or a --config with data.manifest");
      tdseg::Split split = tdseg::split_from_name(split_name);
      if (predict->parsed()) {
        tdseg::require(!checkpoint_path.empty(), "usage", "predict needs --checkpoint");
        tdseg::require(!out_dir.empty(), "usage", "predict needs --out");
        tdseg::run_predict(checkpoint_path, manifest_path, split, out_dir, std::cout);
      } else {
        tdseg::run_eval(checkpoint_path, predictions_dir, manifest_path, split, out_dir,
                        render, std::cout);
      }
    } else if (gradcheck->parsed()) {
      tdseg::GradCheckOptions gopts;
      if (opts.seed >= 0) gopts.seed = static_cast<std::uint32_t>(opts.seed);
      auto entries = tdseg::run_gradcheck(gopts);
      std::cout << tdseg::format_gradcheck(entries);
      return tdseg::all_pass(entries) ? 0 : 1;
    } else if (bench->parsed()) {
      std::cout << tdseg::run_bench();
    }
  } catch (const tdseg::Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
