#include "tdseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "tdseg/losses.hpp"
#include "tdseg/network.hpp"

namespace tdseg {

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, lo, hi);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Indices of the k largest-|g| entries: the best-conditioned probes. An
// entry whose gradient sits below the f32 forward's noise floor cannot be
// resolved by central differences at any step size, so probing by magnitude
// is what keeps the relative comparison meaningful.
std::vector<std::int64_t> top_by_magnitude(const Tensor& g, int k) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(g.size()));
  for (std::int64_t i = 0; i < g.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
  std::partial_sort(idx.begin(), idx.begin() + std::min<std::int64_t>(k, g.size()), idx.end(),
                    [&](std::int64_t a, std::int64_t b) {
                      return std::fabs(g[a]) > std::fabs(g[b]);
                    });
  idx.resize(static_cast<std::size_t>(std::min<std::int64_t>(k, g.size())));
  return idx;
}

struct Harness {
  GradCheckOptions opts;
  std::vector<GradCheckEntry> entries;
  Rng rng;

  explicit Harness(const GradCheckOptions& o) : opts(o), rng(o.seed) {}

  // Compare analytic gradients of J against central differences on the
  // largest-|g| entries per tensor. h_override > 0 widens the step for ops
  // whose outputs depend diffusely on each input (f32 rounding noise scales
  // as 1/h while truncation stays negligible for the smooth ops).
  void check(const std::string& component, double tol,
             std::vector<std::pair<Tensor*, const Tensor*>> tensors_and_grads,
             const std::function<double()>& objective,
             const std::function<bool(std::int64_t, const Tensor&)>& probe_ok = {},
             double h_override = 0.0) {
    GradCheckEntry entry;
    entry.component = component;
    entry.tol = tol;
    const double h = h_override > 0.0 ? h_override : opts.h;
    int tensor_no = 0;
    for (auto& [tensor, grad] : tensors_and_grads) {
      for (std::int64_t idx : top_by_magnitude(*grad, 4)) {
        if (probe_ok && !probe_ok(idx, *tensor)) continue;
        const float orig = (*tensor)[idx];
        (*tensor)[idx] = orig + static_cast<float>(h);
        double fp = objective();
        (*tensor)[idx] = orig - static_cast<float>(h);
        double fm = objective();
        (*tensor)[idx] = orig;
        double fd = (fp - fm) / (2.0 * h);
        double g = (*grad)[idx];
        double rel = std::fabs(fd - g) / std::max({std::fabs(fd), std::fabs(g), 1e-3});
        if (rel > entry.worst_rel) {
          entry.worst_rel = rel;
          entry.worst_at =
              "tensor" + std::to_string(tensor_no) + "[" + std::to_string(idx) + "]";
        }
        ++entry.probes;
      }
      ++tensor_no;
    }
    entry.pass = entry.probes > 0 && entry.worst_rel <= tol;
    entries.push_back(entry);
  }
};

void check_conv(Harness& h) {
  ConvParams p;
  p.kernel = random_tensor({3, 2, 3, 3}, h.rng, -0.4f, 0.4f);
  p.bias = random_tensor({3}, h.rng, -0.3f, 0.3f);
  p.stride = 2;
  p.padding = 1;
  Tensor x = random_tensor({2, 6, 6}, h.rng);
  Tensor go = random_tensor({3, 3, 3}, h.rng);
  ConvGrads g = conv2d_backward(x, p, go);
  if (h.opts.perturb) {
    // corrupt the dominant kernel gradient so the harness must notice
    std::int64_t amax = top_by_magnitude(g.kernel, 1)[0];
    g.kernel[amax] *= 1.1f;
  }
  auto objective = [&]() { return dot(conv2d_forward(x, p), go); };
  h.check("conv2d", 1e-3,
          {{&x, &g.x}, {&p.kernel, &g.kernel}, {&p.bias, &g.bias}}, objective);
}

void check_transposed_conv(Harness& h) {
  ConvParams p;
  p.kernel = random_tensor({2, 3, 4, 4}, h.rng, -0.4f, 0.4f);
  p.bias = random_tensor({3}, h.rng, -0.3f, 0.3f);
  p.stride = 2;
  p.padding = 1;
  Tensor x = random_tensor({2, 5, 5}, h.rng);
  Tensor go = random_tensor({3, 10, 10}, h.rng);
  ConvGrads g = transposed_conv2d_backward(x, p, go);
  auto objective = [&]() { return dot(transposed_conv2d_forward(x, p), go); };
  h.check("transposed_conv2d", 1e-3,
          {{&x, &g.x}, {&p.kernel, &g.kernel}, {&p.bias, &g.bias}}, objective);
}

void check_bilinear(Harness& h) {
  Tensor x = random_tensor({2, 5, 6}, h.rng);
  Tensor go = random_tensor({2, 10, 12}, h.rng);
  Tensor gx = bilinear_upsample2x_backward(go, 5, 6);
  auto objective = [&]() { return dot(bilinear_upsample2x(x), go); };
  h.check("bilinear_upsample2x", 1e-3, {{&x, &gx}}, objective);
}

void check_batchnorm(Harness& h) {
  Tensor x = random_tensor({2, 3, 4, 4}, h.rng);
  Tensor go = random_tensor({2, 3, 4, 4}, h.rng);
  BatchNormParams base;
  base.gamma = random_tensor({3}, h.rng, 0.5f, 1.5f);
  base.beta = random_tensor({3}, h.rng, -0.5f, 0.5f);
  base.running_mean = Tensor::zeros({3});
  base.running_var = Tensor::full({3}, 1.0f);
  BatchNormCache cache;
  {
    BatchNormParams p = base;
    batchnorm_forward(x, p, Mode::kTrain, &cache);
  }
  BatchNormGrads g = batchnorm_backward(cache, base, go);
  auto objective = [&]() {
    BatchNormParams p = base;  // keep running-stat updates out of the probe
    return dot(batchnorm_forward(x, p, Mode::kTrain), go);
  };
  h.check("batchnorm", 1e-3,
          {{&x, &g.x}, {&base.gamma, &g.gamma}, {&base.beta, &g.beta}}, objective, {},
          /*h_override=*/1e-2);
}

void check_relu(Harness& h) {
  Tensor x = random_tensor({2, 6, 6}, h.rng);
  Tensor go = random_tensor({2, 6, 6}, h.rng);
  Tensor gx = relu_backward(x, go);
  auto objective = [&]() { return dot(relu(x), go); };
  auto margin_ok = [&](std::int64_t idx, const Tensor& t) {
    return std::fabs(t[idx]) > 1e-2;  // keep probes away from the kink
  };
  h.check("relu", 1e-3, {{&x, &gx}}, objective, margin_ok);
}

void check_sigmoid(Harness& h) {
  Tensor x = random_tensor({2, 6, 6}, h.rng, -2.0f, 2.0f);
  Tensor go = random_tensor({2, 6, 6}, h.rng);
  Tensor y = sigmoid(x);
  Tensor gx = sigmoid_backward(y, go);
  auto objective = [&]() { return dot(sigmoid(x), go); };
  h.check("sigmoid", 1e-3, {{&x, &gx}}, objective);
}

// Thresholds are placed a safe distance (>= 0.05) from |e| on either side so
// finite differences never cross the soft-threshold kink.
void check_perceptron(Harness& h, TransformKind kind, const std::string& name) {
  const int c = 2, n = 8;
  Tensor x = random_tensor({c, n, n}, h.rng, -0.5f, 0.5f);
  PerceptronParams p;
  p.w = random_tensor({c, n, n}, h.rng, 0.5f, 1.5f);
  p.t = Tensor::zeros({c, n, n});
  {
    Tensor xhat = kind == TransformKind::kHadamard ? ht2d(x) : dct2d(x);
    for (std::int64_t i = 0; i < p.t.size(); ++i) {
      float e = std::fabs(p.w[i] * xhat[i]);
      bool pass_through = uniform_real(h.rng, 0.0f, 1.0f) < 0.7f && e > 0.1f;
      float margin = uniform_real(h.rng, 0.05f, 0.3f);
      p.t[i] = pass_through ? std::max(0.0f, e - margin) : e + margin;
    }
  }
  Tensor go = random_tensor({c, n, n}, h.rng);
  PerceptronWorkspace ws;
  perceptron_forward(x, p, kind, &ws);
  PerceptronGrads g = perceptron_backward(ws, p, kind, go);
  auto objective = [&]() { return dot(perceptron_forward(x, p, kind), go); };
  auto probe_ok = [&](std::int64_t idx, const Tensor& t_ref) {
    // thresholds must stay nonnegative under the +-h probe
    if (&t_ref == &p.t) return t_ref[idx] > 2.0f * static_cast<float>(h.opts.h);
    return true;
  };
  h.check(name, 1e-3, {{&x, &g.x}, {&p.w, &g.w}, {&p.t, &g.t}}, objective, probe_ok);
}

void check_loss(Harness& h, const std::string& which) {
  Tensor probs = random_tensor({1, 6, 6}, h.rng, 0.05f, 0.95f);
  Tensor target({1, 6, 6});
  for (std::int64_t i = 0; i < target.size(); ++i)
    target[i] = uniform_real(h.rng, 0.0f, 1.0f) < 0.3f ? 1.0f : 0.0f;
  LossWeights w;
  Tensor grad;
  std::function<double()> objective;
  if (which == "bce") {
    bce_weighted(probs, target, 3.0f, &grad);
    objective = [&]() { return bce_weighted(probs, target, 3.0f); };
  } else if (which == "dice") {
    dice_loss(probs, target, 1.0f, &grad);
    objective = [&]() { return dice_loss(probs, target, 1.0f); };
  } else if (which == "focal") {
    focal_loss(probs, target, w.focal_gamma, w.focal_alpha, &grad);
    objective = [&]() { return focal_loss(probs, target, w.focal_gamma, w.focal_alpha); };
  } else {
    composite_loss(probs, target, w, 3.0f, &grad);
    objective = [&]() { return composite_loss(probs, target, w, 3.0f); };
  }
  h.check(which, 1e-3, {{&probs, &grad}}, objective);
}

// Activation-mask signature over the trace; a probe whose two evaluations
// disagree has crossed a kink and is discarded.
std::vector<std::uint8_t> mask_signature(const ForwardTrace& tr, const Model& m) {
  std::vector<std::uint8_t> sig;
  auto add_block = [&sig](const ConvBlockTrace& b) {
    for (std::int64_t i = 0; i < b.bn_out.size(); ++i)
      sig.push_back(b.bn_out[i] > 0.0f ? 1 : 0);
  };
  auto add_perceptron = [&sig, &m](const PerceptronWorkspace& ws, const PerceptronRef& ref) {
    const Tensor& t = m.params.at(ref.t).value;
    const std::int64_t map_size = t.size();
    for (std::int64_t i = 0; i < ws.e.size(); ++i)
      sig.push_back(std::fabs(ws.e[i]) > t[i % map_size] ? 1 : 0);
  };
  auto add_branch = [&](const BranchTrace& b, const BranchRefs& refs) {
    add_block(b.enc1);
    add_block(b.enc2);
    add_block(b.enc3);
    add_block(b.bottleneck);
    add_block(b.dec1);
    add_block(b.dec2);
    if (m.cfg.perceptrons_enabled) {
      add_perceptron(b.p1, refs.p1);
      add_perceptron(b.p2, refs.p2);
      add_perceptron(b.p3, refs.p3);
    }
  };
  add_branch(tr.ht, m.ht);
  if (m.cfg.branches == Branches::kHtDct) add_branch(tr.dct, m.dct);
  return sig;
}

void check_end_to_end(Harness& h) {
  NetworkConfig cfg;
  cfg.branches = Branches::kHtDct;
  cfg.base_width = 2;
  cfg.in_channels = 2;
  cfg.in_size = 16;
  Model model = build_network(cfg, h.opts.seed);
  // move perceptrons off the identity so their gradients are exercised
  for (auto& e : model.params.entries()) {
    if (e.name.size() > 2 && e.name.substr(e.name.size() - 2) == ".w")
      for (std::int64_t i = 0; i < e.value.size(); ++i)
        e.value[i] = uniform_real(h.rng, 0.7f, 1.3f);
    if (e.nonneg)
      for (std::int64_t i = 0; i < e.value.size(); ++i)
        e.value[i] = uniform_real(h.rng, 0.0f, 0.02f);
  }
  Tensor x = random_tensor({1, 2, 16, 16}, h.rng);
  Tensor target({1, 1, 16, 16});
  for (std::int64_t i = 0; i < target.size(); ++i)
    target[i] = uniform_real(h.rng, 0.0f, 1.0f) < 0.3f ? 1.0f : 0.0f;
  LossWeights lw;
  const float pw = batch_pos_weight(target, lw.pos_weight_cap);

  ForwardTrace trace;
  Tensor probs = forward(model, x, Mode::kTrain, &trace);
  Tensor grad_probs;
  composite_loss(probs, target, lw, pw, &grad_probs);
  model.params.zero_grads();
  backward(model, trace, grad_probs);
  const std::vector<std::uint8_t> sig_base = mask_signature(trace, model);

  auto loss_and_sig = [&](std::vector<std::uint8_t>& sig) {
    ForwardTrace tr;
    Tensor pr = forward(model, x, Mode::kTrain, &tr);
    sig = mask_signature(tr, model);
    return composite_loss(pr, target, lw, pw);
  };

  GradCheckEntry entry;
  entry.component = "end_to_end_tiny";
  entry.tol = 2e-3;
  const double h_fd = 3e-3;  // loss is f32; mask stability guards the kinks
  for (auto& e : model.params.entries()) {
    if (!e.trainable) continue;
    int done = 0;
    for (std::int64_t idx : top_by_magnitude(e.grad, 6)) {
      if (done >= 2) break;
      const float orig = e.value[idx];
      if (e.nonneg && orig < 1.5f * static_cast<float>(h_fd)) continue;
      auto probe_at = [&](double hh, double& f, std::vector<std::uint8_t>& sig) {
        e.value[idx] = orig + static_cast<float>(hh);
        f = loss_and_sig(sig);
      };
      double fp, fm, fp2, fm2;
      std::vector<std::uint8_t> s1, s2, s3, s4;
      probe_at(h_fd, fp, s1);
      probe_at(-h_fd, fm, s2);
      probe_at(h_fd / 2, fp2, s3);
      probe_at(-h_fd / 2, fm2, s4);
      e.value[idx] = orig;
      // valid only if no activation mask moves anywhere we sampled; a mask
      // can flip and flip back inside the interval, so endpoints alone are
      // not enough
      if (s1 != sig_base || s2 != sig_base || s3 != sig_base || s4 != sig_base) continue;
      double fd_full = (fp - fm) / (2.0 * h_fd);
      double fd = (fp2 - fm2) / h_fd;
      // the two-scale quotients must agree to within the comparison
      // tolerance, otherwise a kink slipped between the sampled points or
      // the probe is noise-dominated
      if (std::fabs(fd_full - fd) > 2e-5 + 1e-3 * std::max(std::fabs(fd), std::fabs(fd_full)))
        continue;
      double g = e.grad[idx];
      // the floor is the f32 loss-difference resolution at this step size;
      // below it a central difference carries no signal
      double rel = std::fabs(fd - g) / std::max({std::fabs(fd), std::fabs(g), 5e-3});
#ifdef TDSEG_GRADCHECK_DEBUG
      if (rel > entry.tol) {
        std::fprintf(stderr,
                     "e2e probe %s[%lld] g=%.6g fd=%.6g fd_full=%.6g rel=%.4g val=%.6g\n",
                     e.name.c_str(), static_cast<long long>(idx), g, fd, fd_full, rel,
                     static_cast<double>(orig));
        for (double hh : {h_fd * 4, h_fd * 2, h_fd / 2, h_fd / 4, h_fd / 8, h_fd / 16}) {
          std::vector<std::uint8_t> sp, sm;
          e.value[idx] = orig + static_cast<float>(hh);
          double fpp = loss_and_sig(sp);
          e.value[idx] = orig - static_cast<float>(hh);
          double fmm = loss_and_sig(sm);
          e.value[idx] = orig;
          std::fprintf(stderr, "   h=%8.6f fd=%.6g base_eq=%d/%d\n", hh,
                       (fpp - fmm) / (2 * hh), sp == sig_base ? 1 : 0,
                       sm == sig_base ? 1 : 0);
        }
      }
#endif
      if (rel > entry.worst_rel) {
        entry.worst_rel = rel;
        entry.worst_at = e.name + "[" + std::to_string(idx) + "]";
      }
      ++entry.probes;
      ++done;
    }
  }
  entry.pass = entry.probes > 0 && entry.worst_rel <= entry.tol;
  h.entries.push_back(entry);
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& opts) {
  Harness h(opts);
  check_conv(h);
  check_transposed_conv(h);
  check_bilinear(h);
  check_batchnorm(h);
  check_relu(h);
  check_sigmoid(h);
  check_perceptron(h, TransformKind::kHadamard, "ht_perceptron");
  check_perceptron(h, TransformKind::kDct, "dct_perceptron");
  check_loss(h, "bce");
  check_loss(h, "dice");
  check_loss(h, "focal");
  check_loss(h, "composite");
  check_end_to_end(h);
  return h.entries;
}

bool all_pass(const std::vector<GradCheckEntry>& entries) {
  for (const auto& e : entries)
    if (!e.pass) return false;
  return !entries.empty();
}

std::string format_gradcheck(const std::vector<GradCheckEntry>& entries) {
  std::ostringstream o;
  o << "tdseg-gradcheck v1\n";
  for (const auto& e : entries) {
    char buf[224];
    std::snprintf(buf, sizeof(buf), "%-20s %s worst_rel %.3g tol %.3g probes %d%s%s\n",
                  e.component.c_str(), e.pass ? "pass" : "FAIL", e.worst_rel, e.tol,
                  e.probes, e.worst_at.empty() ? "" : " at ",
                  e.worst_at.c_str());
    o << buf;
  }
  o << (all_pass(entries) ? "all components pass\n" : "FAILURES present\n");
  return o.str();
}

}  // namespace tdseg
