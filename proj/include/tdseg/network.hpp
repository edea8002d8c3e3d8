#ifndef TDSEG_NETWORK_HPP
#define TDSEG_NETWORK_HPP

#include <optional>
#include <string>
#include <vector>

#include "tdseg/nn.hpp"
#include "tdseg/td_layers.hpp"

namespace tdseg {

// UNet with transform-domain perceptron blocks between encoder stages.
// Single branch (Hadamard) or dual branch (Hadamard + DCT) fused per decoder
// stage by learnable 1x1 convolutions: F = phi(F_ht) + psi(F_dct).

enum class Branches { kHtOnly, kHtDct };

struct NetworkConfig {
  Branches branches = Branches::kHtOnly;
  int base_width = 8;    // first encoder stage channels; deeper stages 2x, 4x
  int in_channels = 12;
  int in_size = 64;      // power of two, divisible by 8 (three halvings)
  int out_channels = 1;  // 2 enables the experimental two-map head
  float mask_threshold = 0.5f;
  bool perceptrons_enabled = true;  // off gives the plain conv UNet
};

void validate_config(const NetworkConfig& cfg);

// Named parameter or persistent buffer with a gradient slot.
struct ParamEntry {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool nonneg = false;  // clamped to >= 0 after every optimizer step
};

class ModelParams {
 public:
  int add(ParamEntry e);
  ParamEntry& at(int idx) { return entries_[static_cast<std::size_t>(idx)]; }
  const ParamEntry& at(int idx) const { return entries_[static_cast<std::size_t>(idx)]; }
  ParamEntry* find(const std::string& name);
  std::size_t count() const { return entries_.size(); }
  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  void zero_grads();

 private:
  std::vector<ParamEntry> entries_;
};

// Sum of element counts over trainable tensors.
std::int64_t param_count(const ModelParams& params);

struct ConvRef {
  int kernel = -1, bias = -1;
  int stride = 1, pad = 0;
};

struct BNRef {
  int gamma = -1, beta = -1, running_mean = -1, running_var = -1;
  float momentum = 0.1f, eps = 1e-5f;
};

struct ConvBlockRef {  // conv + batchnorm + relu
  ConvRef conv;
  BNRef bn;
};

struct PerceptronRef {
  int w = -1, t = -1;
  TransformKind kind = TransformKind::kHadamard;
};

struct BranchRefs {
  ConvBlockRef enc1, enc2, enc3, bottleneck, dec1, dec2;
  PerceptronRef p1, p2, p3;
};

struct Model {
  NetworkConfig cfg;
  ModelParams params;
  BranchRefs ht;
  BranchRefs dct;  // used only when cfg.branches == kHtDct
  ConvRef fuse_phi1, fuse_psi1, fuse_phi2, fuse_psi2;
  ConvRef head;  // transposed conv, stride 2, k=4
};

// Construction is deterministic given the seed; perceptrons start as the
// identity (w=1, t=0), conv kernels are fan-in-scaled uniform, the head bias
// starts at -2 so the initial positive-class probability is ~0.12.
Model build_ht_unet(const NetworkConfig& cfg, std::uint32_t seed);
Model build_td_fusion_unet(const NetworkConfig& cfg, std::uint32_t seed);
Model build_network(const NetworkConfig& cfg, std::uint32_t seed);

// Which branch contributions enter the per-stage fusion sums.
enum class BranchMask { kBoth, kHtPathOnly };

struct ConvBlockTrace {
  Tensor in;
  BatchNormCache bn;
  Tensor bn_out;
};

struct BranchTrace {
  ConvBlockTrace enc1, enc2, enc3, bottleneck, dec1, dec2;
  PerceptronWorkspace p1, p2, p3;
};

struct ForwardTrace {
  Mode mode = Mode::kTrain;
  BranchMask mask = BranchMask::kBoth;
  BranchTrace ht, dct;
  Tensor fuse1_ht_in, fuse1_dct_in;  // decoder stage-1 branch outputs
  Tensor fuse2_ht_in, fuse2_dct_in;
  Tensor head_in;
  Tensor probs;
};

// probs in (0,1), same spatial extent as the input; trace retains what
// backward needs and is valid for exactly one forward call.
Tensor forward(Model& m, const Tensor& x, Mode mode, ForwardTrace* trace = nullptr,
               BranchMask mask = BranchMask::kBoth);

// Reverse-mode composition over the trace; accumulates into param grads.
// Returns the gradient with respect to the network input.
Tensor backward(Model& m, const ForwardTrace& trace, const Tensor& grad_probs);

// 1 where probs > threshold else 0 (0.5 maps to 0).
Tensor predict_mask(const Tensor& probs, float threshold = 0.5f);

// Clamp all nonneg-flagged params (perceptron thresholds) to >= 0.
void project_model_thresholds(Model& m);

// Name of the first non-finite value tensor or gradient, if any.
std::optional<std::string> first_nonfinite(const ModelParams& params);

// Adam over all trainable entries, aligned by index, one shared clock.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const ModelParams& params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
                float eps = 1e-8f);
  void step(ModelParams& params);
  long step_count() const { return steps_; }

 private:
  std::vector<AdamState> states_;
  long steps_ = 0;
};

}  // namespace tdseg

#endif
