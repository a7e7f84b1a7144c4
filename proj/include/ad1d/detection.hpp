#pragma once

#include <array>
#include <vector>

#include "ad1d/network_spec.hpp"
#include "ad1d/nn/tensor.hpp"

namespace ad1d {

/// A predicted anomaly in proportional coordinates. `scale`, `grid` and
/// `anchor` record which prediction slot produced it.
struct Detection {
    int cls = 0;
    double confidence = 0.0;
    double center = 0.0;
    double width = 0.0;
    int scale = 0;
    int grid = 0;
    int anchor = 0;

    double start() const;  // clipped to [0, 1]
    double end() const;    // clipped to [0, 1]
    bool operator==(const Detection&) const = default;
};

/// 1-D intersection over union of two (center, width) intervals.
double iou_1d(double center_a, double width_a, double center_b, double width_b);

/// IoU between detections after clipping to [0, 1] and flooring widths at
/// `min_width` (spikes can decode narrower than one input cell).
double detection_iou(const Detection& a, const Detection& b, double min_width);

/// Deterministic ranking: higher confidence first, then lower center, then
/// lower anchor index (remaining fields settle exact duplicates).
bool ranks_before(const Detection& a, const Detection& b);

struct DecodeOptions {
    double conf_threshold = 0.5;
    int multi_label_top_n = 1;  // >1 emits one detection per top-n class
};

/// Decodes the three prediction maps of batch item `b`.
/// center = (sigmoid(p_center) + grid) / n_grid,
/// width = exp(p_width) * anchor / input_size, confidence = sigmoid(p_conf).
/// Slots with confidence >= threshold are kept and labeled with the
/// argmax class (or the top-n classes).
std::vector<Detection> decode(const std::array<const nn::Tensor1D<float>*, 3>& maps, int b,
                              const AnchorSet& anchors, const NetworkSpec& spec, const DecodeOptions& opt = {});

/// Greedy per-class non-maximum suppression.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double min_width = 0.0);

/// Gaussian soft-NMS per class: conf <- conf * exp(-iou^2 / sigma) against
/// each higher-ranked survivor; detections below `final_threshold` are dropped.
std::vector<Detection> soft_nms(std::vector<Detection> dets, double sigma, double final_threshold,
                                double min_width = 0.0);

}  // namespace ad1d
