#include "tdseg/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace tdseg {

ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& target,
                                 float ignore_value) {
  require_same_shape(pred, target, "confusion_counts");
  ConfusionCounts c;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    if (target[i] == ignore_value) continue;
    const bool p = pred[i] > 0.5f;
    const bool y = target[i] > 0.5f;
    if (p && y)
      ++c.tp;
    else if (p && !y)
      ++c.fp;
    else if (!p && y)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport derive_metrics(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.fp >= 0 && c.fn >= 0 && c.tn >= 0, "data",
          "confusion counts must be nonnegative");
  MetricsReport r;
  r.counts = c;
  const double tp = static_cast<double>(c.tp);
  r.precision = (c.tp + c.fp) > 0 ? tp / (c.tp + c.fp) : 0.0;
  r.recall = (c.tp + c.fn) > 0 ? tp / (c.tp + c.fn) : 0.0;
  r.iou = (c.tp + c.fp + c.fn) > 0 ? tp / (c.tp + c.fp + c.fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

std::string format_metrics(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "tdseg-metrics v1\ntp %lld\nfp %lld\nfn %lld\ntn %lld\n"
                "precision %.9g\nrecall %.9g\niou %.9g\nf1 %.9g\n",
                static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                static_cast<long long>(r.counts.fn), static_cast<long long>(r.counts.tn),
                r.precision, r.recall, r.iou, r.f1);
  return buf;
}

std::vector<unsigned char> render_confusion_image(const Tensor& pred, const Tensor& target,
                                                  const Tensor* background) {
  require_same_shape(pred, target, "render_confusion_image");
  require(pred.rank() >= 2, "shape", "render_confusion_image: expected a 2D mask");
  const int h = pred.extent(pred.rank() - 2);
  const int w = pred.extent(pred.rank() - 1);
  require(pred.size() == static_cast<std::int64_t>(h) * w, "shape",
          "render_confusion_image: expected a single mask plane");

  float bg_lo = 0.0f, bg_scale = 0.0f;
  if (background) {
    require(background->size() == pred.size(), "shape",
            "render_confusion_image: background extent mismatch");
    float lo = (*background)[0], hi = (*background)[0];
    for (std::int64_t i = 0; i < background->size(); ++i) {
      lo = std::min(lo, (*background)[i]);
      hi = std::max(hi, (*background)[i]);
    }
    bg_lo = lo;
    bg_scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
  }

  std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(h) * w * 3);
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    unsigned char r, g, b;
    if (target[i] == -1.0f) {
      r = g = b = 64;
    } else {
      const bool p = pred[i] > 0.5f;
      const bool y = target[i] > 0.5f;
      if (p && y) {
        r = 255, g = 128, b = 0;
      } else if (p && !y) {
        r = 255, g = 255, b = 0;
      } else if (!p && y) {
        r = 0, g = 0, b = 255;
      } else if (background) {
        float v = ((*background)[i] - bg_lo) * bg_scale;
        unsigned char gray =
            background && bg_scale > 0.0f
                ? static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, v)))
                : static_cast<unsigned char>(128);
        r = g = b = gray;
      } else {
        r = g = b = 128;
      }
    }
    out.push_back(r);
    out.push_back(g);
    out.push_back(b);
  }
  return out;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io", "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "io", "write failed for " + path);
}

}  // namespace tdseg
