#include "ad1d/preprocess.hpp"

#include <algorithm>
#include <string>

#include "ad1d/error.hpp"
#include "ad1d/sample.hpp"

namespace ad1d {

std::vector<float> binning_min_downsample(std::span<const float> series, int target) {
    const std::size_t size = series.size();
    if (size == 0 || target <= 0 || size < static_cast<std::size_t>(target))
        throw InputError("binning_min_downsample: need 0 < target <= size, got size " + std::to_string(size) +
                         ", target " + std::to_string(target));
    const std::size_t T = static_cast<std::size_t>(target);
    const std::size_t n = (size + T - 1) / T;
    const std::size_t stretched = n * T;
    std::vector<float> out(T);
    for (std::size_t bin = 0; bin < T; ++bin) {
        float m = series[(bin * n) * size / stretched];
        for (std::size_t j = bin * n + 1; j < (bin + 1) * n; ++j) m = std::min(m, series[j * size / stretched]);
        out[bin] = m;
    }
    return out;
}

std::vector<float> normalize(std::span<const float> raw) {
    std::vector<float> out(raw.size());
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        float v = raw[i];
        if (!(v >= 0.0f)) {  // also catches NaN
            v = 0.0f;
            ++clamped;
        } else if (v > static_cast<float>(kMaxMer)) {
            v = static_cast<float>(kMaxMer);
            ++clamped;
        }
        out[i] = static_cast<float>(v / kMaxMer);
    }
    if (clamped > 0) warn("normalize: clamped " + std::to_string(clamped) + " values outside [0, 63.75]");
    return out;
}

std::vector<float> prepare_input(std::span<const float> raw, int input_size) {
    if (raw.size() < 2) throw InputError("series must have at least 2 values, got " + std::to_string(raw.size()));
    if (raw.size() >= static_cast<std::size_t>(input_size)) return normalize(binning_min_downsample(raw, input_size));
    std::vector<float> stretched(input_size);
    for (std::size_t j = 0; j < stretched.size(); ++j) stretched[j] = raw[j * raw.size() / stretched.size()];
    return normalize(stretched);
}

}  // namespace ad1d
