#ifndef TDSEG_DATA_IO_HPP
#define TDSEG_DATA_IO_HPP

#include <string>
#include <vector>

#include "tdseg/preprocess.hpp"
#include "tdseg/tensor.hpp"

namespace tdseg {

// Minimal binary tensor container: one ASCII header line
//   "tdseg-tensor v1 dtype=f32 shape=C,H,W order=le\n"
// followed by the sentinel byte 0xAB and the raw row-major little-endian
// 32-bit float payload. Roundtrips are bit-exact.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

struct SampleRecord {
  std::string input_path;   // relative to the manifest directory
  std::string target_path;
  Split split = Split::kTrain;
};

// Line-oriented dataset index with a version field; target tensors are
// (1,H,W) with values in {-1,0,1}.
struct Manifest {
  int channels = 0;
  int resolution = 0;
  std::vector<std::string> roles;  // per input channel
  std::vector<SampleRecord> samples;
  std::string base_dir;  // set on load; not serialized

  std::vector<std::size_t> split_indices(Split s) const;
  int role_index(const std::string& role) const;  // -1 if absent
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

struct SynthConfig {
  int count = 32;
  int size = 64;       // power of two
  int channels = 4;    // >= 4: prefire_mask, wind_x, wind_y, elevation, env_*
  std::uint32_t seed = 1;
  float wind_bias = 0.6f;    // directional growth bias in [0,1]
  int growth_steps = 2;
  float uncertain_frac = 0.02f;
};

// Seeded synthetic wildfire-spread dataset: smooth terrain, constant
// per-sample wind field, elliptical pre-fire blob, next-day target grown
// from the blob with wind-aligned dilation, and a fixed fraction of target
// pixels marked uncertain (-1). Writes tensors plus a split-labeled manifest.
Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir);

struct PreprocessConfig {
  bool margin_crop = true;
  MarginConfig margin;
  SmoothingConfig smoothing;
  enum class SmoothMode { kOff, kReplace, kAppend } smooth_mode = SmoothMode::kAppend;
  bool flips = true;  // train split only
};

// Channels whose role receives Gaussian-mixture smoothing.
bool role_is_smoothed(const std::string& role);
// Channels exempt from mean/std normalization (mask-like).
bool role_is_mask_like(const std::string& role);

// Input channel count after preprocessing (append mode adds one smoothed
// map per smoothed role).
int effective_channels(const Manifest& m, const PreprocessConfig& prep);

// Per-channel normalization stats over the raw training split (smoothed
// channels are exempt and keep identity stats).
std::vector<ChannelStat> compute_norm_stats(const Manifest& m, const PreprocessConfig& prep);

struct Batch {
  Tensor x;        // (B, C_eff, N, N), preprocessed
  Tensor target;   // (B, 1, N, N), raw {-1,0,1}
  std::vector<std::size_t> sample_indices;
};

// One epoch of batches in a deterministic seeded order. The preprocessing
// pipeline (margin crop, smoothing, normalization, train-only flips) is a
// pure function of (seed, epoch, sample index). The final short batch is
// kept.
std::vector<Batch> load_batches(const Manifest& m, Split split, int batch_size,
                                std::uint32_t seed, std::uint64_t epoch,
                                const PreprocessConfig& prep,
                                const std::vector<ChannelStat>& stats, bool shuffle,
                                bool augment);

// Assemble one preprocessed sample (no flips).
void load_sample(const Manifest& m, std::size_t index, std::uint32_t seed,
                 std::uint64_t epoch, const PreprocessConfig& prep,
                 const std::vector<ChannelStat>& stats, Tensor& x, Tensor& target);

}  // namespace tdseg

#endif
