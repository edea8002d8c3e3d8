#include "tdseg/network.hpp"

#include <cmath>

namespace tdseg {

void validate_config(const NetworkConfig& cfg) {
  require(cfg.base_width >= 1, "config", "base_width must be >= 1");
  require(cfg.in_channels >= 1, "config", "in_channels must be >= 1");
  require(is_power_of_two(cfg.in_size), "config",
          "in_size must be a power of two, got " + std::to_string(cfg.in_size));
  require(cfg.in_size % 8 == 0, "config",
          "in_size must be divisible by 8 (three halvings), got " +
              std::to_string(cfg.in_size));
  require(cfg.out_channels == 1 || cfg.out_channels == 2, "config",
          "out_channels must be 1 or 2");
  require(cfg.mask_threshold > 0.0f && cfg.mask_threshold < 1.0f, "config",
          "mask_threshold must lie in (0,1)");
}

int ModelParams::add(ParamEntry e) {
  for (const auto& existing : entries_)
    require(existing.name != e.name, "config", "duplicate parameter name " + e.name);
  e.grad = Tensor(e.value.shape());
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

ParamEntry* ModelParams::find(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

void ModelParams::zero_grads() {
  for (auto& e : entries_) e.grad.fill(0.0f);
}

std::int64_t param_count(const ModelParams& params) {
  std::int64_t n = 0;
  for (const auto& e : params.entries())
    if (e.trainable) n += e.value.size();
  return n;
}

namespace {

Tensor init_kernel(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor k(std::move(shape));
  float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  for (std::int64_t i = 0; i < k.size(); ++i) k[i] = uniform_real(rng, -bound, bound);
  return k;
}

ConvRef add_conv(ModelParams& params, const std::string& prefix, int in_ch, int out_ch, int k,
                 int stride, int pad, Rng& rng, bool transposed = false,
                 float bias_init = 0.0f) {
  ConvRef ref;
  ref.stride = stride;
  ref.pad = pad;
  std::vector<int> kshape = transposed ? std::vector<int>{in_ch, out_ch, k, k}
                                       : std::vector<int>{out_ch, in_ch, k, k};
  ref.kernel = params.add({prefix + ".kernel", init_kernel(kshape, in_ch * k * k, rng)});
  ref.bias = params.add({prefix + ".bias", Tensor::full({out_ch}, bias_init)});
  return ref;
}

BNRef add_bn(ModelParams& params, const std::string& prefix, int ch) {
  BNRef ref;
  ref.gamma = params.add({prefix + ".gamma", Tensor::full({ch}, 1.0f)});
  ref.beta = params.add({prefix + ".beta", Tensor::zeros({ch})});
  ParamEntry rm{prefix + ".running_mean", Tensor::zeros({ch})};
  rm.trainable = false;
  ref.running_mean = params.add(std::move(rm));
  ParamEntry rv{prefix + ".running_var", Tensor::full({ch}, 1.0f)};
  rv.trainable = false;
  ref.running_var = params.add(std::move(rv));
  return ref;
}

ConvBlockRef add_conv_block(ModelParams& params, const std::string& prefix, int in_ch,
                            int out_ch, int k, int stride, int pad, Rng& rng) {
  ConvBlockRef ref;
  ref.conv = add_conv(params, prefix, in_ch, out_ch, k, stride, pad, rng);
  ref.bn = add_bn(params, prefix + ".bn", out_ch);
  return ref;
}

PerceptronRef add_perceptron(ModelParams& params, const std::string& prefix, int ch, int size,
                             TransformKind kind) {
  PerceptronRef ref;
  ref.kind = kind;
  ref.w = params.add({prefix + ".w", Tensor::full({ch, size, size}, 1.0f)});
  ParamEntry t{prefix + ".t", Tensor::zeros({ch, size, size})};
  t.nonneg = true;
  ref.t = params.add(std::move(t));
  return ref;
}

BranchRefs add_branch(ModelParams& params, const std::string& prefix,
                      const NetworkConfig& cfg, TransformKind kind, Rng& rng) {
  const int w = cfg.base_width;
  const int n = cfg.in_size;
  BranchRefs b;
  b.enc1 = add_conv_block(params, prefix + "enc1", cfg.in_channels, w, 4, 2, 1, rng);
  b.p1 = add_perceptron(params, prefix + "p1", w, n / 2, kind);
  b.enc2 = add_conv_block(params, prefix + "enc2", w, 2 * w, 7, 2, 3, rng);
  b.p2 = add_perceptron(params, prefix + "p2", 2 * w, n / 4, kind);
  b.enc3 = add_conv_block(params, prefix + "enc3", 2 * w, 4 * w, 7, 2, 3, rng);
  b.p3 = add_perceptron(params, prefix + "p3", 4 * w, n / 8, kind);
  b.bottleneck = add_conv_block(params, prefix + "bottleneck", 4 * w, 4 * w, 7, 1, 3, rng);
  b.dec1 = add_conv_block(params, prefix + "dec1", 6 * w, 2 * w, 7, 1, 3, rng);
  b.dec2 = add_conv_block(params, prefix + "dec2", 3 * w, w, 7, 1, 3, rng);
  return b;
}

ConvParams conv_params(const ModelParams& params, const ConvRef& ref) {
  ConvParams p;
  p.kernel = params.at(ref.kernel).value;
  p.bias = params.at(ref.bias).value;
  p.stride = ref.stride;
  p.padding = ref.pad;
  return p;
}

BatchNormParams bn_params(const ModelParams& params, const BNRef& ref) {
  BatchNormParams p;
  p.gamma = params.at(ref.gamma).value;
  p.beta = params.at(ref.beta).value;
  p.running_mean = params.at(ref.running_mean).value;
  p.running_var = params.at(ref.running_var).value;
  p.momentum = ref.momentum;
  p.eps = ref.eps;
  return p;
}

PerceptronParams perceptron_params(const ModelParams& params, const PerceptronRef& ref) {
  PerceptronParams p;
  p.w = params.at(ref.w).value;
  p.t = params.at(ref.t).value;
  return p;
}

void add_grad(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "gradient accumulation");
  for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Model build_ht_unet(const NetworkConfig& cfg, std::uint32_t seed) {
  validate_config(cfg);
  require(cfg.branches == Branches::kHtOnly, "config",
          "build_ht_unet expects the single-branch config");
  Model m;
  m.cfg = cfg;
  Rng rng(seed);
  m.ht = add_branch(m.params, "", cfg, TransformKind::kHadamard, rng);
  m.head = add_conv(m.params, "head", cfg.base_width, cfg.out_channels, 4, 2, 1, rng,
                    /*transposed=*/true, /*bias_init=*/-2.0f);
  return m;
}

Model build_td_fusion_unet(const NetworkConfig& cfg, std::uint32_t seed) {
  validate_config(cfg);
  require(cfg.branches == Branches::kHtDct, "config",
          "build_td_fusion_unet expects the dual-branch config");
  Model m;
  m.cfg = cfg;
  Rng rng(seed);
  const int w = cfg.base_width;
  m.ht = add_branch(m.params, "ht.", cfg, TransformKind::kHadamard, rng);
  m.dct = add_branch(m.params, "dct.", cfg, TransformKind::kDct, rng);
  m.fuse_phi1 = add_conv(m.params, "fuse1.phi", 2 * w, 2 * w, 1, 1, 0, rng);
  m.fuse_psi1 = add_conv(m.params, "fuse1.psi", 2 * w, 2 * w, 1, 1, 0, rng);
  m.fuse_phi2 = add_conv(m.params, "fuse2.phi", w, w, 1, 1, 0, rng);
  m.fuse_psi2 = add_conv(m.params, "fuse2.psi", w, w, 1, 1, 0, rng);
  m.head = add_conv(m.params, "head", w, cfg.out_channels, 4, 2, 1, rng,
                    /*transposed=*/true, /*bias_init=*/-2.0f);
  return m;
}

Model build_network(const NetworkConfig& cfg, std::uint32_t seed) {
  return cfg.branches == Branches::kHtOnly ? build_ht_unet(cfg, seed)
                                           : build_td_fusion_unet(cfg, seed);
}

namespace {

Tensor conv_block_forward(Model& m, const ConvBlockRef& ref, const Tensor& x, Mode mode,
                          ConvBlockTrace& tr) {
  tr.in = x;
  Tensor y = conv2d_forward(x, conv_params(m.params, ref.conv));
  BatchNormParams bn = bn_params(m.params, ref.bn);
  tr.bn_out = batchnorm_forward(y, bn, mode, &tr.bn);
  if (mode == Mode::kTrain) {
    // running stats live in the registry
    m.params.at(ref.bn.running_mean).value = bn.running_mean;
    m.params.at(ref.bn.running_var).value = bn.running_var;
  }
  return relu(tr.bn_out);
}

Tensor conv_block_backward(Model& m, const ConvBlockRef& ref, const ConvBlockTrace& tr,
                           const Tensor& grad_y) {
  Tensor g_bn_out = relu_backward(tr.bn_out, grad_y);
  BatchNormGrads bg = batchnorm_backward(tr.bn, bn_params(m.params, ref.bn), g_bn_out);
  add_grad(m.params.at(ref.bn.gamma).grad, bg.gamma);
  add_grad(m.params.at(ref.bn.beta).grad, bg.beta);
  ConvGrads cg = conv2d_backward(tr.in, conv_params(m.params, ref.conv), bg.x);
  add_grad(m.params.at(ref.conv.kernel).grad, cg.kernel);
  add_grad(m.params.at(ref.conv.bias).grad, cg.bias);
  return cg.x;
}

Tensor maybe_perceptron_forward(Model& m, const PerceptronRef& ref, const Tensor& x,
                                PerceptronWorkspace& ws) {
  if (!m.cfg.perceptrons_enabled) return x;
  return perceptron_forward(x, perceptron_params(m.params, ref), ref.kind, &ws);
}

Tensor maybe_perceptron_backward(Model& m, const PerceptronRef& ref,
                                 const PerceptronWorkspace& ws, const Tensor& grad_y) {
  if (!m.cfg.perceptrons_enabled) return grad_y;
  PerceptronGrads pg = perceptron_backward(ws, perceptron_params(m.params, ref), ref.kind,
                                           grad_y);
  add_grad(m.params.at(ref.w).grad, pg.w);
  add_grad(m.params.at(ref.t).grad, pg.t);
  return pg.x;
}

// Encoder + bottleneck; p1/p2 outputs are the skip sources (available in the
// trace as enc2.in and enc3.in... the bottleneck input is the p3 output).
Tensor encode(Model& m, const BranchRefs& br, const Tensor& x, Mode mode, BranchTrace& tr) {
  Tensor e1 = conv_block_forward(m, br.enc1, x, mode, tr.enc1);
  Tensor p1 = maybe_perceptron_forward(m, br.p1, e1, tr.p1);
  Tensor e2 = conv_block_forward(m, br.enc2, p1, mode, tr.enc2);
  Tensor p2 = maybe_perceptron_forward(m, br.p2, e2, tr.p2);
  Tensor e3 = conv_block_forward(m, br.enc3, p2, mode, tr.enc3);
  Tensor p3 = maybe_perceptron_forward(m, br.p3, e3, tr.p3);
  return conv_block_forward(m, br.bottleneck, p3, mode, tr.bottleneck);
}

struct EncoderGrads {
  Tensor x;  // grad wrt the branch input
};

// grad_bott: gradient at the bottleneck output; skip_p2 and skip_p1 are the
// gradients flowing back through the decoder concats into the perceptron
// outputs.
EncoderGrads encode_backward(Model& m, const BranchRefs& br, const BranchTrace& tr,
                             const Tensor& grad_bott, const Tensor& skip_p2,
                             const Tensor& skip_p1) {
  Tensor g_p3 = conv_block_backward(m, br.bottleneck, tr.bottleneck, grad_bott);
  Tensor g_e3 = maybe_perceptron_backward(m, br.p3, tr.p3, g_p3);
  Tensor g_p2 = conv_block_backward(m, br.enc3, tr.enc3, g_e3);
  add_grad(g_p2, skip_p2);
  Tensor g_e2 = maybe_perceptron_backward(m, br.p2, tr.p2, g_p2);
  Tensor g_p1 = conv_block_backward(m, br.enc2, tr.enc2, g_e2);
  add_grad(g_p1, skip_p1);
  Tensor g_e1 = maybe_perceptron_backward(m, br.p1, tr.p1, g_p1);
  return {conv_block_backward(m, br.enc1, tr.enc1, g_e1)};
}

Tensor head_forward(Model& m, const Tensor& x, ForwardTrace& tr) {
  tr.head_in = x;
  Tensor pre = transposed_conv2d_forward(x, conv_params(m.params, m.head));
  tr.probs = sigmoid(pre);
  return tr.probs;
}

Tensor head_backward(Model& m, const ForwardTrace& tr, const Tensor& grad_probs) {
  Tensor g_pre = sigmoid_backward(tr.probs, grad_probs);
  ConvGrads cg = transposed_conv2d_backward(tr.head_in, conv_params(m.params, m.head), g_pre);
  add_grad(m.params.at(m.head.kernel).grad, cg.kernel);
  add_grad(m.params.at(m.head.bias).grad, cg.bias);
  return cg.x;
}

Tensor fuse_conv_forward(Model& m, const ConvRef& ref, const Tensor& x) {
  return conv2d_forward(x, conv_params(m.params, ref));
}

Tensor fuse_conv_backward(Model& m, const ConvRef& ref, const Tensor& x,
                          const Tensor& grad_y) {
  ConvGrads cg = conv2d_backward(x, conv_params(m.params, ref), grad_y);
  add_grad(m.params.at(ref.kernel).grad, cg.kernel);
  add_grad(m.params.at(ref.bias).grad, cg.bias);
  return cg.x;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "fusion sum");
  Tensor out = a;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

}  // namespace

Tensor forward(Model& m, const Tensor& x, Mode mode, ForwardTrace* trace, BranchMask mask) {
  require(x.rank() == 3 || x.rank() == 4, "shape", "forward: expected rank-3/4 input");
  int in_ch = x.extent(x.rank() - 3);
  int in_h = x.extent(x.rank() - 2);
  int in_w = x.extent(x.rank() - 1);
  require(in_ch == m.cfg.in_channels, "shape",
          "forward: input channels " + std::to_string(in_ch) + " do not match config " +
              std::to_string(m.cfg.in_channels));
  require(in_h == m.cfg.in_size && in_w == m.cfg.in_size, "shape",
          "forward: input extent " + std::to_string(in_h) + "x" + std::to_string(in_w) +
              " does not match config " + std::to_string(m.cfg.in_size));

  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr = ForwardTrace{};
  tr.mode = mode;
  tr.mask = mask;

  if (m.cfg.branches == Branches::kHtOnly) {
    Tensor bott = encode(m, m.ht, x, mode, tr.ht);
    Tensor u1 = bilinear_upsample2x(bott);
    Tensor c1 = concat_channels(u1, tr.ht.enc3.in);  // skip: p2 output
    Tensor d1 = conv_block_forward(m, m.ht.dec1, c1, mode, tr.ht.dec1);
    Tensor u2 = bilinear_upsample2x(d1);
    Tensor c2 = concat_channels(u2, tr.ht.enc2.in);  // skip: p1 output
    Tensor d2 = conv_block_forward(m, m.ht.dec2, c2, mode, tr.ht.dec2);
    return head_forward(m, d2, tr);
  }

  const bool both = mask == BranchMask::kBoth;
  Tensor bott_ht = encode(m, m.ht, x, mode, tr.ht);
  Tensor bott_dct = both ? encode(m, m.dct, x, mode, tr.dct) : Tensor();

  Tensor c1h = concat_channels(bilinear_upsample2x(bott_ht), tr.ht.enc3.in);
  Tensor d1h = conv_block_forward(m, m.ht.dec1, c1h, mode, tr.ht.dec1);
  tr.fuse1_ht_in = d1h;
  Tensor f1 = fuse_conv_forward(m, m.fuse_phi1, d1h);
  if (both) {
    Tensor c1d = concat_channels(bilinear_upsample2x(bott_dct), tr.dct.enc3.in);
    Tensor d1d = conv_block_forward(m, m.dct.dec1, c1d, mode, tr.dct.dec1);
    tr.fuse1_dct_in = d1d;
    f1 = add_tensors(f1, fuse_conv_forward(m, m.fuse_psi1, d1d));
  }

  Tensor u2 = bilinear_upsample2x(f1);
  Tensor c2h = concat_channels(u2, tr.ht.enc2.in);
  Tensor d2h = conv_block_forward(m, m.ht.dec2, c2h, mode, tr.ht.dec2);
  tr.fuse2_ht_in = d2h;
  Tensor f2 = fuse_conv_forward(m, m.fuse_phi2, d2h);
  if (both) {
    Tensor c2d = concat_channels(u2, tr.dct.enc2.in);
    Tensor d2d = conv_block_forward(m, m.dct.dec2, c2d, mode, tr.dct.dec2);
    tr.fuse2_dct_in = d2d;
    f2 = add_tensors(f2, fuse_conv_forward(m, m.fuse_psi2, d2d));
  }
  return head_forward(m, f2, tr);
}

Tensor backward(Model& m, const ForwardTrace& trace, const Tensor& grad_probs) {
  require(!trace.probs.empty(), "shape", "backward: trace has no forward results");
  require_same_shape(trace.probs, grad_probs, "backward grad_probs");

  if (m.cfg.branches == Branches::kHtOnly) {
    const int w = m.cfg.base_width;
    Tensor g_d2 = head_backward(m, trace, grad_probs);
    Tensor g_c2 = conv_block_backward(m, m.ht.dec2, trace.ht.dec2, g_d2);
    Tensor g_u2, g_skip_p1;
    split_channels_backward(g_c2, 2 * w, g_u2, g_skip_p1);
    Tensor g_d1 = bilinear_upsample2x_backward(g_u2, trace.ht.dec1.bn_out.extent(2),
                                               trace.ht.dec1.bn_out.extent(3));
    Tensor g_c1 = conv_block_backward(m, m.ht.dec1, trace.ht.dec1, g_d1);
    Tensor g_u1, g_skip_p2;
    split_channels_backward(g_c1, 4 * w, g_u1, g_skip_p2);
    Tensor g_bott = bilinear_upsample2x_backward(g_u1, trace.ht.bottleneck.bn_out.extent(2),
                                                 trace.ht.bottleneck.bn_out.extent(3));
    return encode_backward(m, m.ht, trace.ht, g_bott, g_skip_p2, g_skip_p1).x;
  }

  const bool both = trace.mask == BranchMask::kBoth;
  const int w = m.cfg.base_width;

  Tensor g_f2 = head_backward(m, trace, grad_probs);
  Tensor g_d2h = fuse_conv_backward(m, m.fuse_phi2, trace.fuse2_ht_in, g_f2);
  Tensor g_c2h = conv_block_backward(m, m.ht.dec2, trace.ht.dec2, g_d2h);
  Tensor g_u2, g_skip_p1h;
  split_channels_backward(g_c2h, 2 * w, g_u2, g_skip_p1h);

  Tensor g_skip_p1d;
  if (both) {
    Tensor g_d2d = fuse_conv_backward(m, m.fuse_psi2, trace.fuse2_dct_in, g_f2);
    Tensor g_c2d = conv_block_backward(m, m.dct.dec2, trace.dct.dec2, g_d2d);
    Tensor g_u2d;
    split_channels_backward(g_c2d, 2 * w, g_u2d, g_skip_p1d);
    add_grad(g_u2, g_u2d);  // u2 fed both branch decoders
  }

  const int h1 = trace.ht.dec1.bn_out.extent(2);
  const int w1 = trace.ht.dec1.bn_out.extent(3);
  Tensor g_f1 = bilinear_upsample2x_backward(g_u2, h1, w1);

  Tensor g_d1h = fuse_conv_backward(m, m.fuse_phi1, trace.fuse1_ht_in, g_f1);
  Tensor g_c1h = conv_block_backward(m, m.ht.dec1, trace.ht.dec1, g_d1h);
  Tensor g_u1h, g_skip_p2h;
  split_channels_backward(g_c1h, 4 * w, g_u1h, g_skip_p2h);
  Tensor g_bott_h = bilinear_upsample2x_backward(
      g_u1h, trace.ht.bottleneck.bn_out.extent(2), trace.ht.bottleneck.bn_out.extent(3));
  Tensor g_x = encode_backward(m, m.ht, trace.ht, g_bott_h, g_skip_p2h, g_skip_p1h).x;

  if (both) {
    Tensor g_d1d = fuse_conv_backward(m, m.fuse_psi1, trace.fuse1_dct_in, g_f1);
    Tensor g_c1d = conv_block_backward(m, m.dct.dec1, trace.dct.dec1, g_d1d);
    Tensor g_u1d, g_skip_p2d;
    split_channels_backward(g_c1d, 4 * w, g_u1d, g_skip_p2d);
    Tensor g_bott_d = bilinear_upsample2x_backward(
        g_u1d, trace.dct.bottleneck.bn_out.extent(2), trace.dct.bottleneck.bn_out.extent(3));
    Tensor g_x_dct =
        encode_backward(m, m.dct, trace.dct, g_bott_d, g_skip_p2d, g_skip_p1d).x;
    add_grad(g_x, g_x_dct);
  }
  return g_x;
}

Tensor predict_mask(const Tensor& probs, float threshold) {
  Tensor mask(probs.shape());
  for (std::int64_t i = 0; i < probs.size(); ++i)
    mask[i] = probs[i] > threshold ? 1.0f : 0.0f;
  return mask;
}

void project_model_thresholds(Model& m) {
  for (auto& e : m.params.entries())
    if (e.nonneg) project_nonnegative(e.value);
}

std::optional<std::string> first_nonfinite(const ModelParams& params) {
  for (const auto& e : params.entries()) {
    if (!all_finite(e.value)) return e.name;
    if (!all_finite(e.grad)) return e.name + ".grad";
  }
  return std::nullopt;
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, float lr, float beta1, float beta2,
                             float eps) {
  states_.reserve(params.count());
  for (const auto& e : params.entries())
    states_.push_back(e.trainable ? make_adam_state(e.value, lr, beta1, beta2, eps)
                                  : AdamState{});
}

void AdamOptimizer::step(ModelParams& params) {
  require(states_.size() == params.count(), "config",
          "optimizer state count does not match parameter count");
  ++steps_;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    auto& e = params.entries()[i];
    if (!e.trainable) continue;
    adam_step(e.value, e.grad, states_[i]);
  }
}

}  // namespace tdseg
