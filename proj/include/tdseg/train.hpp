#ifndef TDSEG_TRAIN_HPP
#define TDSEG_TRAIN_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "tdseg/checkpoint.hpp"
#include "tdseg/config.hpp"
#include "tdseg/eval.hpp"

namespace tdseg {

struct TrainEpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_precision = 0.0, val_recall = 0.0, val_iou = 0.0, val_f1 = 0.0;
  double wall_ms = 0.0;  // reported on the console; the persisted log stays
                         // deterministic and omits it
};

struct TrainResult {
  std::vector<TrainEpochRecord> log;
  std::string checkpoint_path;
  std::string log_path;
  double best_val_f1 = -1.0;
  long steps = 0;
};

// Deterministic-field serialization ("tdseg-trainlog v1" lines).
std::string format_train_log(const std::vector<TrainEpochRecord>& log);

// Synthetic dataset generation driven by the gen.* config block; writes the
// dataset next to cfg.manifest_path.
Manifest run_gen_data(const RunConfig& cfg, std::ostream& console);

// Composite-loss training with threshold projection after every step and
// best-validation-F1 checkpointing. Writes the effective config, the train
// log, and the checkpoint under cfg.out_dir. Aborts with a "nan" error
// naming the first non-finite tensor if the loss leaves the reals.
TrainResult run_train(const RunConfig& cfg, std::ostream& console);

// Eval-mode inference over one split; writes per-sample probability and
// binary-mask tensors into out_dir.
void run_predict(const std::string& checkpoint_path, const std::string& manifest_path,
                 Split split, const std::string& out_dir, std::ostream& console);

// Micro-averaged metrics over a split, either by running the checkpoint or
// by reading masks produced by run_predict. Optionally renders per-sample
// confusion images.
MetricsReport run_eval(const std::string& checkpoint_path, const std::string& predictions_dir,
                       const std::string& manifest_path, Split split,
                       const std::string& out_dir, bool render, std::ostream& console);

// Loss target: uncertain (-1) pixels are treated as background for the loss;
// metrics always exclude them instead.
Tensor loss_target(const Tensor& raw_target);

std::string prediction_prob_name(std::size_t sample_index);
std::string prediction_mask_name(std::size_t sample_index);

}  // namespace tdseg

#endif
