#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ad1d {

/// Upper end of the RxMER reporting range in dB; values are reported in
/// quarter-dB steps from 0 to this bound.
constexpr double kMaxMer = 63.75;

/// Ground-truth anomaly in proportional coordinates of its series.
struct Annotation {
    int cls = 0;
    double x = 0.0;  // center
    double w = 0.0;  // width

    double start() const { return x - w / 2; }
    double end() const { return x + w / 2; }
    bool operator==(const Annotation&) const = default;
};

enum class SampleSource { Synthetic, Labeled };

struct Sample {
    std::vector<float> values;
    std::vector<Annotation> annotations;
    SampleSource source = SampleSource::Labeled;

    bool operator==(const Sample&) const = default;
};

using Dataset = std::vector<Sample>;

/// Index into default_class_names(); throws InputError for unknown names.
int class_index(std::string_view name);
const std::string& class_name(int cls);

}  // namespace ad1d
