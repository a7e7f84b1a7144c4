#include "ad1d/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ad1d/error.hpp"
#include "ad1d/nn/layers.hpp"

namespace ad1d {

double Detection::start() const { return std::clamp(center - width / 2, 0.0, 1.0); }
double Detection::end() const { return std::clamp(center + width / 2, 0.0, 1.0); }

double iou_1d(double center_a, double width_a, double center_b, double width_b) {
    const double a0 = center_a - width_a / 2, a1 = center_a + width_a / 2;
    const double b0 = center_b - width_b / 2, b1 = center_b + width_b / 2;
    const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    const double uni = (a1 - a0) + (b1 - b0) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

std::pair<double, double> clipped_interval(const Detection& d, double min_width) {
    const double w = std::max(d.width, min_width);
    return {std::clamp(d.center - w / 2, 0.0, 1.0), std::clamp(d.center + w / 2, 0.0, 1.0)};
}

}  // namespace

double detection_iou(const Detection& a, const Detection& b, double min_width) {
    const auto [a0, a1] = clipped_interval(a, min_width);
    const auto [b0, b1] = clipped_interval(b, min_width);
    const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    const double uni = (a1 - a0) + (b1 - b0) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool ranks_before(const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.center != b.center) return a.center < b.center;
    if (a.anchor != b.anchor) return a.anchor < b.anchor;
    if (a.scale != b.scale) return a.scale < b.scale;
    if (a.grid != b.grid) return a.grid < b.grid;
    if (a.width != b.width) return a.width < b.width;
    return a.cls < b.cls;
}

std::vector<Detection> decode(const std::array<const nn::Tensor1D<float>*, 3>& maps, int b, const AnchorSet& anchors,
                              const NetworkSpec& spec, const DecodeOptions& opt) {
    const int nc = spec.n_classes;
    const int stride = 3 + nc;
    const int top_n = std::clamp(opt.multi_label_top_n, 1, nc);
    std::vector<Detection> out;
    std::vector<int> order(nc);
    std::vector<float> probs(nc);
    for (int scale = 0; scale < 3; ++scale) {
        const auto& m = *maps[scale];
        const int grids = m.length;
        if (m.channels != spec.prediction_channels())
            throw ConfigError("decode: prediction map has " + std::to_string(m.channels) + " channels");
        for (int slot = 0; slot < spec.n_anchors; ++slot) {
            const int base = slot * stride;
            const int anchor = AnchorSet::index_of(scale, slot);
            for (int g = 0; g < grids; ++g) {
                const double conf = nn::sigmoid(static_cast<double>(m.at(b, base + 2, g)));
                if (conf < opt.conf_threshold) continue;
                Detection d;
                d.confidence = conf;
                d.center = (nn::sigmoid(static_cast<double>(m.at(b, base, g))) + g) / grids;
                d.width = std::exp(static_cast<double>(m.at(b, base + 1, g))) * anchors.widths[anchor] /
                          spec.input_size;
                d.scale = scale;
                d.grid = g;
                d.anchor = anchor;
                for (int c = 0; c < nc; ++c) probs[c] = m.at(b, base + 3 + c, g);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return probs[x] > probs[y]; });
                for (int k = 0; k < top_n; ++k) {
                    d.cls = order[k];
                    out.push_back(d);
                }
            }
        }
    }
    return out;
}

namespace {

std::map<int, std::vector<Detection>> by_class(std::vector<Detection>& dets) {
    std::map<int, std::vector<Detection>> groups;
    for (auto& d : dets) groups[d.cls].push_back(d);
    for (auto& [cls, g] : groups) std::sort(g.begin(), g.end(), ranks_before);
    return groups;
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double min_width) {
    std::vector<Detection> kept;
    for (auto& [cls, group] : by_class(dets)) {
        std::vector<bool> removed(group.size(), false);
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (removed[i]) continue;
            kept.push_back(group[i]);
            for (std::size_t j = i + 1; j < group.size(); ++j)
                if (!removed[j] && detection_iou(group[i], group[j], min_width) > iou_threshold) removed[j] = true;
        }
    }
    std::sort(kept.begin(), kept.end(), ranks_before);
    return kept;
}

std::vector<Detection> soft_nms(std::vector<Detection> dets, double sigma, double final_threshold, double min_width) {
    if (!(sigma > 0.0)) throw ConfigError("soft-NMS sigma must be positive");
    std::vector<Detection> kept;
    for (auto& [cls, group] : by_class(dets)) {
        std::vector<Detection> pending = std::move(group);
        while (!pending.empty()) {
            auto best = std::min_element(pending.begin(), pending.end(), ranks_before);
            const Detection top = *best;
            pending.erase(best);
            kept.push_back(top);
            for (auto& d : pending) {
                const double iou = detection_iou(top, d, min_width);
                d.confidence *= std::exp(-iou * iou / sigma);
            }
            std::erase_if(pending, [&](const Detection& d) { return d.confidence < final_threshold; });
        }
    }
    std::sort(kept.begin(), kept.end(), ranks_before);
    return kept;
}

}  // namespace ad1d
