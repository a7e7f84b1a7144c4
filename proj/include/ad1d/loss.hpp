#pragma once

// Detection loss over the three prediction maps of one sample:
//   L1  scale-weighted squared error on center and sqrt(width), responsible slots
//   L2  objectness BCE, weight 1 on responsible slots and 0.5 on background,
//       ignored slots excluded
//   L3  per-class BCE on responsible slots
// Each term can add its gradient w.r.t. the raw map values into map.grad.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "ad1d/detection.hpp"
#include "ad1d/network_spec.hpp"
#include "ad1d/nn/layers.hpp"
#include "ad1d/sample.hpp"
#include "ad1d/targets.hpp"

namespace ad1d {

struct LossConfig {
    double lambda_object = 1.0;
    double lambda_background = 0.5;
    double ignore_threshold = 0.7;
    double prob_clamp = 1e-7;
    // Measure the L1 center error in grids of the predicting layer instead of
    // proportional units. Multiplies the center term by grids^2, which is what
    // lets the finest layer learn sub-grid positions of narrow anomalies.
    bool center_in_grids = false;
};

struct LossParts {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    double total() const { return l1 + l2 + l3; }

    LossParts& operator+=(const LossParts& o) {
        l1 += o.l1;
        l2 += o.l2;
        l3 += o.l3;
        return *this;
    }
};

template <typename T>
using PredictionMaps = std::array<nn::Tensor1D<T>*, 3>;

namespace detail {

struct SlotView {
    int base;    // first channel of this anchor's block
    int anchor;  // global anchor index
};

inline SlotView slot_view(const NetworkSpec& spec, int scale, int slot) {
    return {slot * (3 + spec.n_classes), AnchorSet::index_of(scale, slot)};
}

inline double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace detail

/// Flags background slots whose decoded prediction overlaps any truth with
/// IoU above the threshold. Responsible slots are never ignored.
template <typename T>
void mark_ignored(TargetAssignment& targets, const PredictionMaps<T>& maps, int b, std::span<const Annotation> truths,
                  const AnchorSet& anchors, const NetworkSpec& spec, double threshold) {
    for (int s = 0; s < 3; ++s) {
        const auto& m = *maps[s];
        const int grids = targets.grids[s];
        for (int slot = 0; slot < spec.n_anchors; ++slot) {
            const auto v = detail::slot_view(spec, s, slot);
            for (int g = 0; g < grids; ++g) {
                auto& st = targets.at(s, g, slot);
                st.ignore = false;
                if (st.responsible || truths.empty()) continue;
                const double cx = (nn::sigmoid(static_cast<double>(m.at(b, v.base, g))) + g) / grids;
                const double w = std::exp(static_cast<double>(m.at(b, v.base + 1, g))) * anchors.widths[v.anchor] /
                                 spec.input_size;
                for (const auto& t : truths) {
                    if (iou_1d(cx, w, t.x, t.w) > threshold) {
                        st.ignore = true;
                        break;
                    }
                }
            }
        }
    }
}

/// L1 = sum C_i * gamma^2 * [(x - x_hat)^2 + (sqrt(w) - sqrt(w_hat))^2], gamma = 2 - w.
/// With `center_in_grids` the center difference is taken as x*N - (sigmoid + g).
template <typename T>
double loss_localization(const PredictionMaps<T>& maps, int b, const TargetAssignment& targets,
                         const AnchorSet& anchors, const NetworkSpec& spec, double grad_scale = 0.0,
                         bool center_in_grids = false) {
    double loss = 0.0;
    for (int s = 0; s < 3; ++s) {
        auto& m = *maps[s];
        const int grids = targets.grids[s];
        const double unit = center_in_grids ? grids : 1.0;
        for (int slot = 0; slot < spec.n_anchors; ++slot) {
            const auto v = detail::slot_view(spec, s, slot);
            for (int g = 0; g < grids; ++g) {
                const auto& st = targets.at(s, g, slot);
                if (!st.responsible) continue;
                const double sx = nn::sigmoid(static_cast<double>(m.at(b, v.base, g)));
                const double x_hat = (sx + g) / grids;
                const double sqrt_w_hat = std::sqrt(anchors.widths[v.anchor] / spec.input_size) *
                                          std::exp(0.5 * static_cast<double>(m.at(b, v.base + 1, g)));
                const double gamma2 = (2.0 - st.w) * (2.0 - st.w);
                const double dx = (st.x - x_hat) * unit;
                const double dw = std::sqrt(st.w) - sqrt_w_hat;
                loss += gamma2 * (dx * dx + dw * dw);
                if (grad_scale != 0.0) {
                    m.grad_row(b, v.base)[g] +=
                        static_cast<T>(grad_scale * 2.0 * gamma2 * (-dx) * sx * (1.0 - sx) * unit / grids);
                    m.grad_row(b, v.base + 1)[g] += static_cast<T>(grad_scale * gamma2 * (-dw) * sqrt_w_hat);
                }
            }
        }
    }
    return loss;
}

/// L2: weighted BCE on sigmoid(p_conf) over all non-ignored slots.
template <typename T>
double loss_confidence(const PredictionMaps<T>& maps, int b, const TargetAssignment& targets, const NetworkSpec& spec,
                       const LossConfig& cfg, double grad_scale = 0.0) {
    double loss = 0.0;
    for (int s = 0; s < 3; ++s) {
        auto& m = *maps[s];
        const int grids = targets.grids[s];
        for (int slot = 0; slot < spec.n_anchors; ++slot) {
            const auto v = detail::slot_view(spec, s, slot);
            for (int g = 0; g < grids; ++g) {
                const auto& st = targets.at(s, g, slot);
                if (st.ignore && !st.responsible) continue;
                const double c_hat = nn::sigmoid(static_cast<double>(m.at(b, v.base + 2, g)));
                const double p = detail::clamp_prob(c_hat, cfg.prob_clamp);
                const double target = st.responsible ? 1.0 : 0.0;
                const double lambda = st.responsible ? cfg.lambda_object : cfg.lambda_background;
                loss += -lambda * (target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
                // Logistic gradient; it stays informative where the clamp saturates.
                if (grad_scale != 0.0) m.grad_row(b, v.base + 2)[g] += static_cast<T>(grad_scale * lambda * (c_hat - target));
            }
        }
    }
    return loss;
}

/// L3: per-class BCE on sigmoid(class logits), responsible slots only.
template <typename T>
double loss_classification(const PredictionMaps<T>& maps, int b, const TargetAssignment& targets,
                           const NetworkSpec& spec, const LossConfig& cfg, double grad_scale = 0.0) {
    double loss = 0.0;
    for (int s = 0; s < 3; ++s) {
        auto& m = *maps[s];
        const int grids = targets.grids[s];
        for (int slot = 0; slot < spec.n_anchors; ++slot) {
            const auto v = detail::slot_view(spec, s, slot);
            for (int g = 0; g < grids; ++g) {
                const auto& st = targets.at(s, g, slot);
                if (!st.responsible) continue;
                for (int c = 0; c < spec.n_classes; ++c) {
                    const double p_hat = nn::sigmoid(static_cast<double>(m.at(b, v.base + 3 + c, g)));
                    const double p = detail::clamp_prob(p_hat, cfg.prob_clamp);
                    const double target = c == st.cls ? 1.0 : 0.0;
                    loss += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
                    if (grad_scale != 0.0) m.grad_row(b, v.base + 3 + c)[g] += static_cast<T>(grad_scale * (p_hat - target));
                }
            }
        }
    }
    return loss;
}

/// L_total = L1 + L2 + L3 for batch item `b`; gradients scaled by `grad_scale`.
template <typename T>
LossParts total_loss(const PredictionMaps<T>& maps, int b, const TargetAssignment& targets, const AnchorSet& anchors,
                     const NetworkSpec& spec, const LossConfig& cfg, double grad_scale = 0.0) {
    LossParts parts;
    parts.l1 = loss_localization(maps, b, targets, anchors, spec, grad_scale, cfg.center_in_grids);
    parts.l2 = loss_confidence(maps, b, targets, spec, cfg, grad_scale);
    parts.l3 = loss_classification(maps, b, targets, spec, cfg, grad_scale);
    return parts;
}

}  // namespace ad1d
