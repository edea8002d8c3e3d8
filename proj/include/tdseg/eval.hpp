#ifndef TDSEG_EVAL_HPP
#define TDSEG_EVAL_HPP

#include <string>
#include <vector>

#include "tdseg/tensor.hpp"

namespace tdseg {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// pred is binary {0,1}; target is {-1,0,1} and pixels at ignore_value are
// excluded. The counts partition the remaining pixels.
ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& target,
                                 float ignore_value = -1.0f);

struct MetricsReport {
  ConfusionCounts counts;
  double precision = 0.0, recall = 0.0, iou = 0.0, f1 = 0.0;
};

// Zero denominators yield 0 by convention.
MetricsReport derive_metrics(const ConfusionCounts& c);
double f1_score(double precision, double recall);

// Structured text report with fixed field names
// (tp, fp, fn, tn, precision, recall, iou, f1).
std::string format_metrics(const MetricsReport& r);

// Confusion overlay, binary PPM (P6). FP (255,255,0), FN (0,0,255),
// TP (255,128,0), uncertain (64,64,64); TN is the background channel min-max
// scaled to grayscale, or mid-gray 128 without one.
std::vector<unsigned char> render_confusion_image(const Tensor& pred, const Tensor& target,
                                                  const Tensor* background = nullptr);

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace tdseg

#endif
