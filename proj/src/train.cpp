#include "tdseg/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace tdseg {

namespace fs = std::filesystem;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string g9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

Tensor loss_target(const Tensor& raw_target) {
  Tensor t = raw_target;
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0f) t[i] = 0.0f;
  return t;
}

std::string prediction_prob_name(std::size_t sample_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "pred_%04zu_prob.tf", sample_index);
  return buf;
}

std::string prediction_mask_name(std::size_t sample_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "pred_%04zu_mask.tf", sample_index);
  return buf;
}

std::string format_train_log(const std::vector<TrainEpochRecord>& log) {
  std::ostringstream o;
  o << "tdseg-trainlog v1\n";
  for (const auto& r : log)
    o << "epoch " << r.epoch << " train_loss " << g9(r.train_loss) << " val_loss "
      << g9(r.val_loss) << " val_precision " << g9(r.val_precision) << " val_recall "
      << g9(r.val_recall) << " val_iou " << g9(r.val_iou) << " val_f1 " << g9(r.val_f1)
      << "\n";
  return o.str();
}

Manifest run_gen_data(const RunConfig& cfg, std::ostream& console) {
  require(!cfg.manifest_path.empty(), "config", "gen-data needs data.manifest in the config");
  fs::path manifest_path(cfg.manifest_path);
  std::string dir = manifest_path.parent_path().string();
  if (dir.empty()) dir = ".";
  Manifest m = generate_synthetic(cfg.gen, dir);
  if (manifest_path.filename() != "manifest.txt") write_manifest(cfg.manifest_path, m);
  std::size_t n_train = m.split_indices(Split::kTrain).size();
  std::size_t n_val = m.split_indices(Split::kVal).size();
  std::size_t n_test = m.split_indices(Split::kTest).size();
  console << "generated " << m.samples.size() << " samples (" << n_train << " train, "
          << n_val << " val, " << n_test << " test) at " << m.resolution << "x"
          << m.resolution << " with " << m.channels << " channels -> " << dir << "\n";
  return m;
}

namespace {

struct SplitEval {
  double loss = 0.0;
  MetricsReport metrics;
};

SplitEval evaluate_split(Model& model, const Manifest& m, Split split, const RunConfig& cfg,
                         const std::vector<ChannelStat>& stats) {
  SplitEval ev;
  auto batches = load_batches(m, split, cfg.batch_size, cfg.seed, /*epoch=*/0, cfg.prep,
                              stats, /*shuffle=*/false, /*augment=*/false);
  ConfusionCounts counts;
  double loss_sum = 0.0;
  std::int64_t n_batches = 0;
  for (const auto& batch : batches) {
    Tensor probs = forward(model, batch.x, Mode::kEval);
    Tensor target = loss_target(batch.target);
    float pw = batch_pos_weight(target, cfg.loss.pos_weight_cap);
    loss_sum += composite_loss(probs, target, cfg.loss, pw);
    ++n_batches;
    Tensor mask = predict_mask(probs, cfg.network.mask_threshold);
    counts += confusion_counts(mask, batch.target);
  }
  ev.loss = n_batches > 0 ? loss_sum / static_cast<double>(n_batches) : 0.0;
  ev.metrics = derive_metrics(counts);
  return ev;
}

}  // namespace

TrainResult run_train(const RunConfig& cfg, std::ostream& console) {
  require(!cfg.manifest_path.empty(), "config", "train needs data.manifest in the config");
  require(cfg.epochs >= 1, "config", "train.epochs must be >= 1");
  Manifest m = read_manifest(cfg.manifest_path);

  const int c_eff = effective_channels(m, cfg.prep);
  require(c_eff == cfg.network.in_channels, "config",
          "network.in_channels is " + std::to_string(cfg.network.in_channels) +
              " but the dataset provides " + std::to_string(c_eff) +
              " channels after preprocessing (raw " + std::to_string(m.channels) + ")");
  require(m.resolution == cfg.network.in_size, "config",
          "network.in_size does not match the dataset resolution " +
              std::to_string(m.resolution));

  fs::create_directories(cfg.out_dir);
  write_run_config((fs::path(cfg.out_dir) / "effective_config.cfg").string(), cfg);

  std::vector<ChannelStat> stats = compute_norm_stats(m, cfg.prep);
  Model model = build_network(cfg.network, cfg.seed);
  AdamOptimizer opt(model.params, cfg.opt.lr, cfg.opt.beta1, cfg.opt.beta2, cfg.opt.eps);

  TrainResult result;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.tdc").string();
  result.log_path = (fs::path(cfg.out_dir) / "train_log.txt").string();
  console << "training " << (cfg.network.branches == Branches::kHtOnly ? "ht_unet"
                                                                       : "td_fusion_unet")
          << " base_width=" << cfg.network.base_width << " params="
          << param_count(model.params) << " seed=" << cfg.seed << "\n";

  long step = 0;
  bool step_cap_hit = false;
  ForwardTrace trace;
  for (int epoch = 1; epoch <= cfg.epochs && !step_cap_hit; ++epoch) {
    double t0 = now_ms();
    auto batches = load_batches(m, Split::kTrain, cfg.batch_size, cfg.seed,
                                static_cast<std::uint64_t>(epoch), cfg.prep, stats,
                                /*shuffle=*/true, /*augment=*/cfg.prep.flips);
    double loss_sum = 0.0;
    std::int64_t n_steps_epoch = 0;
    for (const auto& batch : batches) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        step_cap_hit = true;
        break;
      }
      Tensor probs = forward(model, batch.x, Mode::kTrain, &trace);
      Tensor target = loss_target(batch.target);
      float pw = batch_pos_weight(target, cfg.loss.pos_weight_cap);
      Tensor grad_probs;
      double loss = composite_loss(probs, target, cfg.loss, pw, &grad_probs);
      if (!std::isfinite(loss)) {
        auto bad = first_nonfinite(model.params);
        throw Error("nan", "non-finite loss at step " + std::to_string(step + 1) +
                               "; first non-finite tensor: " + bad.value_or("probs"));
      }
      model.params.zero_grads();
      backward(model, trace, grad_probs);
      opt.step(model.params);
      project_model_thresholds(model);
      loss_sum += loss;
      ++n_steps_epoch;
      ++step;
    }
    if (n_steps_epoch == 0) break;  // step cap landed on an epoch boundary

    TrainEpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_steps_epoch);
    SplitEval val = evaluate_split(model, m, Split::kVal, cfg, stats);
    rec.val_loss = val.loss;
    rec.val_precision = val.metrics.precision;
    rec.val_recall = val.metrics.recall;
    rec.val_iou = val.metrics.iou;
    rec.val_f1 = val.metrics.f1;
    rec.wall_ms = now_ms() - t0;
    result.log.push_back(rec);

    if (val.metrics.f1 > result.best_val_f1) {
      result.best_val_f1 = val.metrics.f1;
      save_checkpoint(result.checkpoint_path, model, stats, cfg.prep);
    }
    console << "epoch " << epoch << " train_loss " << g9(rec.train_loss) << " val_loss "
            << g9(rec.val_loss) << " val_f1 " << g9(rec.val_f1) << " wall_ms "
            << g9(rec.wall_ms) << "\n";
  }
  result.steps = step;

  std::ofstream log_out(result.log_path);
  require(log_out.good(), "io", "cannot open " + result.log_path + " for writing");
  log_out << format_train_log(result.log);
  require(log_out.good(), "io", "write failed for " + result.log_path);
  console << "done: " << step << " steps, best val_f1 " << g9(result.best_val_f1) << " -> "
          << result.checkpoint_path << "\n";
  return result;
}

void run_predict(const std::string& checkpoint_path, const std::string& manifest_path,
                 Split split, const std::string& out_dir, std::ostream& console) {
  std::vector<ChannelStat> stats;
  PreprocessConfig prep;
  Model model = load_checkpoint(checkpoint_path, &stats, &prep);
  Manifest m = read_manifest(manifest_path);
  require(static_cast<int>(stats.size()) == effective_channels(m, prep), "config",
          "checkpoint normalization stats do not match the dataset channel count");
  require(effective_channels(m, prep) == model.cfg.in_channels, "config",
          "checkpoint in_channels does not match the dataset");
  require(m.resolution == model.cfg.in_size, "config",
          "checkpoint in_size does not match the dataset resolution");

  fs::create_directories(out_dir);
  auto indices = m.split_indices(split);
  require(!indices.empty(), "data", "split '" + split_name(split) + "' is empty");
  for (std::size_t si : indices) {
    Tensor x, target;
    load_sample(m, si, /*seed=*/0, /*epoch=*/0, prep, stats, x, target);
    Tensor xb({1, x.extent(0), x.extent(1), x.extent(2)});
    std::copy(x.data(), x.data() + x.size(), xb.data());
    Tensor probs = forward(model, xb, Mode::kEval);
    Tensor prob_map({model.cfg.out_channels, model.cfg.in_size, model.cfg.in_size});
    std::copy(probs.data(), probs.data() + probs.size(), prob_map.data());
    Tensor mask = predict_mask(prob_map, model.cfg.mask_threshold);
    write_tensor((fs::path(out_dir) / prediction_prob_name(si)).string(), prob_map);
    write_tensor((fs::path(out_dir) / prediction_mask_name(si)).string(), mask);
  }
  console << "wrote " << indices.size() << " predictions for split '" << split_name(split)
          << "' -> " << out_dir << "\n";
}

namespace {

// Preprocessing for run_predict/run_eval is pinned (seed 0, epoch 0, no
// flips) so repeated inference is bit-identical.
Tensor infer_probs(Model& model, const Manifest& m, std::size_t si,
                   const PreprocessConfig& prep, const std::vector<ChannelStat>& stats) {
  Tensor x, target;
  load_sample(m, si, /*seed=*/0, /*epoch=*/0, prep, stats, x, target);
  Tensor xb({1, x.extent(0), x.extent(1), x.extent(2)});
  std::copy(x.data(), x.data() + x.size(), xb.data());
  return forward(model, xb, Mode::kEval);
}

}  // namespace

MetricsReport run_eval(const std::string& checkpoint_path, const std::string& predictions_dir,
                       const std::string& manifest_path, Split split,
                       const std::string& out_dir, bool render, std::ostream& console) {
  require(checkpoint_path.empty() != predictions_dir.empty(), "usage",
          "eval needs exactly one of a checkpoint or a predictions directory");
  Manifest m = read_manifest(manifest_path);
  auto indices = m.split_indices(split);
  require(!indices.empty(), "data", "split '" + split_name(split) + "' is empty");

  Model model;
  std::vector<ChannelStat> stats;
  PreprocessConfig prep;
  const bool from_checkpoint = !checkpoint_path.empty();
  if (from_checkpoint) {
    model = load_checkpoint(checkpoint_path, &stats, &prep);
    require(static_cast<int>(stats.size()) == effective_channels(m, prep), "config",
            "checkpoint normalization stats do not match the dataset channel count");
  }

  if (render || !out_dir.empty()) fs::create_directories(out_dir);
  const int bg_channel = std::max(m.role_index("elevation"), 0);
  ConfusionCounts counts;
  for (std::size_t si : indices) {
    Tensor target = read_tensor((fs::path(m.base_dir) / m.samples[si].target_path).string());
    Tensor mask;
    if (from_checkpoint) {
      Tensor probs = infer_probs(model, m, si, prep, stats);
      Tensor prob_map({1, m.resolution, m.resolution});
      std::copy(probs.data(), probs.data() + prob_map.size(), prob_map.data());
      mask = predict_mask(prob_map, model.cfg.mask_threshold);
    } else {
      fs::path p = fs::path(predictions_dir) / prediction_mask_name(si);
      require(fs::exists(p), "data", "missing prediction " + p.string());
      Tensor full = read_tensor(p.string());
      mask = Tensor({1, m.resolution, m.resolution});
      std::copy(full.data(), full.data() + mask.size(), mask.data());
    }
    Tensor target_plane = Tensor::from_data(
        {m.resolution, m.resolution},
        std::vector<float>(target.data(), target.data() + target.size()));
    Tensor mask_plane = Tensor::from_data(
        {m.resolution, m.resolution},
        std::vector<float>(mask.data(),
                           mask.data() + static_cast<std::int64_t>(m.resolution) * m.resolution));
    counts += confusion_counts(mask_plane, target_plane);
    if (render) {
      Tensor raw = read_tensor((fs::path(m.base_dir) / m.samples[si].input_path).string());
      Tensor bg({m.resolution, m.resolution});
      const std::int64_t plane = static_cast<std::int64_t>(m.resolution) * m.resolution;
      std::copy(raw.data() + bg_channel * plane, raw.data() + (bg_channel + 1) * plane,
                bg.data());
      auto ppm = render_confusion_image(mask_plane, target_plane, &bg);
      char name[48];
      std::snprintf(name, sizeof(name), "confusion_%04zu.ppm", si);
      write_bytes((fs::path(out_dir) / name).string(), ppm);
    }
  }
  MetricsReport report = derive_metrics(counts);
  if (!out_dir.empty()) {
    std::ofstream out(fs::path(out_dir) / "metrics.txt");
    require(out.good(), "io", "cannot write metrics report");
    out << format_metrics(report);
  }
  console << format_metrics(report);
  return report;
}

}  // namespace tdseg
