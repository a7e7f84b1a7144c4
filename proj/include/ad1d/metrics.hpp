#pragma once

#include <span>
#include <string>
#include <vector>

#include "ad1d/detection.hpp"
#include "ad1d/model.hpp"
#include "ad1d/sample.hpp"

namespace ad1d {

/// Greedy matching of one sample's detections against its truths. `dets`
/// must be ordered by confidence, highest first. Each detection takes the
/// unmatched same-class truth with the highest IoU >= threshold (ties go to
/// the lower truth index). Returns the matched truth index per detection,
/// or -1 for a false positive.
std::vector<int> match_detections(std::span<const Detection> dets, std::span<const Annotation> truths,
                                  double iou_threshold);

/// All-point average precision of a ranked TP/FP sequence: the area under
/// the precision-recall curve after making precision monotone
/// non-increasing. With no truths the result is 1 when `tp` is empty and 0
/// otherwise.
double average_precision(std::span<const bool> tp, int n_truths);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct ClassMetrics {
    std::string name;
    int n_truths = 0;
    int n_detections = 0;
    double ap50 = 0.0;
    double ap75 = 0.0;
    int tp50 = 0, fp50 = 0, fn50 = 0;
    int tp75 = 0, fp75 = 0, fn75 = 0;
    std::vector<PrPoint> curve50;  // raw (not enveloped) PR points at IoU 0.5
};

struct EvalReport {
    std::vector<ClassMetrics> classes;
    double map50 = 0.0;
    double map75 = 0.0;
    std::size_t samples = 0;

    std::string to_text() const;
    std::string to_json() const;
};

/// Scores per-sample detections against a dataset. `detections[i]` belongs
/// to `data[i]`. Classes absent from both truths and detections count as
/// AP 1 and are reported with a warning.
EvalReport evaluate_detections(std::span<const std::vector<Detection>> detections, const Dataset& data,
                               const std::vector<std::string>& class_names);

/// Per-class AP at an arbitrary IoU threshold, ranked like
/// evaluate_detections.
std::vector<double> class_ap_at(std::span<const std::vector<Detection>> detections, const Dataset& data,
                                int n_classes, double iou_threshold);

/// Runs the model on every sample and scores the result.
EvalReport evaluate(const Model& model, const Dataset& data, const DetectorConfig& cfg = {});

/// Same as `evaluate` for inputs already prepared at the model input size;
/// `truths[i]` holds the annotations of `inputs[i]`.
EvalReport evaluate_prepared(const Model& model, std::span<const std::vector<float>> inputs, const Dataset& truths,
                             const DetectorConfig& cfg = {});

}  // namespace ad1d
