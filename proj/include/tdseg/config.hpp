#ifndef TDSEG_CONFIG_HPP
#define TDSEG_CONFIG_HPP

#include <string>

#include "tdseg/data_io.hpp"
#include "tdseg/losses.hpp"
#include "tdseg/network.hpp"

namespace tdseg {

struct OptimizerConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Everything a run needs, parsed from a flat "key = value" text file.
// No environment variables affect numerics; a fixed seed makes the whole run
// bit-reproducible within one build.
struct RunConfig {
  NetworkConfig network;
  LossWeights loss;
  OptimizerConfig opt;
  int epochs = 100;
  int batch_size = 8;
  int max_steps = 0;  // 0 = uncapped
  std::uint32_t seed = 1234;
  std::string manifest_path;
  PreprocessConfig prep;
  std::string out_dir = "out";
  SynthConfig gen;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
// Serialize with every default resolved; parseable by parse_run_config.
std::string format_run_config(const RunConfig& cfg);
void write_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace tdseg

#endif
