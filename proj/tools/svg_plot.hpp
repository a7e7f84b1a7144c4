#pragma once

#include <string>
#include <vector>

#include "ad1d/detection.hpp"
#include "ad1d/sample.hpp"

namespace ad1d::tools {

struct MetricsRow {
    long long batch = 0;
    double l1 = 0, l2 = 0, l3 = 0, total = 0;
    double map50 = -1, map75 = -1;  // -1 when the row has no evaluation
};

/// One capture as a line plot with ground-truth spans shaded underneath and
/// detections drawn as labeled bars above the trace.
std::string series_svg(const Sample& sample, const std::vector<Detection>& detections,
                       const std::vector<std::string>& class_names, const std::string& title);

/// Training curves from a metrics CSV: losses on a log axis, mAP on a
/// second panel.
std::string metrics_svg(const std::vector<MetricsRow>& rows, const std::string& title);

std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace ad1d::tools
