#pragma once

// Central finite-difference checks of the hand-written backward passes, run
// on the double-precision instantiation of every layer. Shared by the unit
// tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ad1d/loss.hpp"
#include "ad1d/network.hpp"
#include "ad1d/nn/layers.hpp"
#include "ad1d/targets.hpp"

namespace gradcheck {

using ad1d::nn::Phase;
using ad1d::nn::Tensor1D;
using T64 = Tensor1D<double>;

struct Summary {
    std::string name;
    int cases = 0;
    int failed = 0;
    double worst = 0.0;  // largest relative error seen

    void merge(const Summary& o) {
        cases += o.cases;
        failed += o.failed;
        worst = std::max(worst, o.worst);
    }
};

inline double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
}

constexpr double kStep = 1e-6;
constexpr double kTolerance = 1e-3;

/// Tracks one case: several coordinates, the case fails if any one does.
struct Case {
    double worst = 0.0;
    void check(double analytic, double numeric) { worst = std::max(worst, relative_error(analytic, numeric)); }
    void record(Summary& s) const {
        ++s.cases;
        s.worst = std::max(s.worst, worst);
        if (!(worst < kTolerance)) ++s.failed;
    }
};

inline double central_difference(const std::function<double()>& f, double& x) {
    const double old = x;
    x = old + kStep;
    const double up = f();
    x = old - kStep;
    const double down = f();
    x = old;
    return (up - down) / (2 * kStep);
}

inline T64 random_tensor(std::mt19937_64& rng, int b, int c, int l) {
    std::normal_distribution<double> nd(0.0, 1.0);
    T64 t(b, c, l);
    for (auto& v : t.values) v = nd(rng);
    return t;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Coordinates to probe: all of them for small buffers, a random subset otherwise.
inline std::vector<std::size_t> probe_indices(std::mt19937_64& rng, std::size_t n, std::size_t max_probes = 12) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n > max_probes) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(max_probes);
    }
    return idx;
}

// Each layer check builds L = <forward(x), R> for a random R, so dL/dout = R.

inline Summary check_conv(std::mt19937_64& rng, int n_cases) {
    Summary s{"conv1d"};
    std::uniform_int_distribution<int> ch(1, 4), len(4, 11), pick(0, 1);
    for (int k = 0; k < n_cases; ++k) {
        const int kernel = pick(rng) ? 3 : 1, stride = pick(rng) ? 2 : 1;
        const bool bias = pick(rng);
        auto p = ad1d::nn::make_conv<double>(ch(rng), ch(rng), kernel, stride, bias);
        std::normal_distribution<double> nd(0.0, 0.5);
        for (auto& w : p.weights.value) w = nd(rng);
        for (auto& w : p.bias.value) w = nd(rng);
        T64 x = random_tensor(rng, 1 + pick(rng), p.in_channels, len(rng));
        T64 y;
        ad1d::nn::conv1d_forward(x, p, y);
        const auto R = random_tensor(rng, y.batch, y.channels, y.length).values;
        auto loss = [&] {
            T64 o;
            ad1d::nn::conv1d_forward(x, p, o);
            return dot(o.values, R);
        };
        x.enable_grad();
        y.grad = R;
        std::fill(p.weights.grad.begin(), p.weights.grad.end(), 0.0);
        std::fill(p.bias.grad.begin(), p.bias.grad.end(), 0.0);
        ad1d::nn::conv1d_backward(x, p, y);
        Case c;
        for (auto i : probe_indices(rng, x.size())) c.check(x.grad[i], central_difference(loss, x.values[i]));
        for (auto i : probe_indices(rng, p.weights.value.size()))
            c.check(p.weights.grad[i], central_difference(loss, p.weights.value[i]));
        for (auto i : probe_indices(rng, p.bias.value.size()))
            c.check(p.bias.grad[i], central_difference(loss, p.bias.value[i]));
        c.record(s);
    }
    return s;
}

inline Summary check_batchnorm(std::mt19937_64& rng, int n_cases) {
    Summary s{"batchnorm"};
    std::uniform_int_distribution<int> ch(1, 4), len(3, 9), bat(1, 3), pick(0, 3);
    for (int k = 0; k < n_cases; ++k) {
        // Mostly training phase (batch statistics); every fourth case uses running statistics.
        const Phase phase = pick(rng) == 0 ? Phase::Infer : Phase::Train;
        auto p = ad1d::nn::make_batchnorm<double>(ch(rng));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> pos(0.5, 2.0);
        for (int c = 0; c < p.channels; ++c) {
            p.gamma.value[c] = nd(rng);
            p.beta.value[c] = nd(rng);
            p.running_mean.value[c] = nd(rng);
            p.running_var.value[c] = pos(rng);
        }
        T64 x = random_tensor(rng, bat(rng), p.channels, len(rng));
        const auto R = random_tensor(rng, x.batch, x.channels, x.length).values;
        auto f = [&] {
            T64 o;
            ad1d::nn::BatchNormCache<double> tmp;
            auto q = p;  // keep the running statistics fixed
            ad1d::nn::batchnorm_forward(x, q, phase, o, tmp);
            return dot(o.values, R);
        };
        ad1d::nn::BatchNormCache<double> cache;
        T64 y;
        auto q = p;
        ad1d::nn::batchnorm_forward(x, q, phase, y, cache);
        x.enable_grad();
        y.grad = R;
        std::fill(p.gamma.grad.begin(), p.gamma.grad.end(), 0.0);
        std::fill(p.beta.grad.begin(), p.beta.grad.end(), 0.0);
        ad1d::nn::batchnorm_backward(x, p, y, cache);
        Case c;
        for (auto i : probe_indices(rng, x.size())) c.check(x.grad[i], central_difference(f, x.values[i]));
        for (int i = 0; i < p.channels; ++i) {
            c.check(p.gamma.grad[i], central_difference(f, p.gamma.value[i]));
            c.check(p.beta.grad[i], central_difference(f, p.beta.value[i]));
        }
        c.record(s);
    }
    return s;
}

inline Summary check_leaky(std::mt19937_64& rng, int n_cases) {
    Summary s{"leaky_relu"};
    std::uniform_int_distribution<int> ch(1, 4), len(2, 12);
    for (int k = 0; k < n_cases; ++k) {
        T64 x = random_tensor(rng, 2, ch(rng), len(rng));
        // Keep inputs away from the kink so the difference quotient is exact.
        for (auto& v : x.values)
            if (std::abs(v) < 1e-3) v += 0.01;
        T64 y;
        ad1d::nn::leaky_relu_forward(x, 0.1, y);
        const auto R = random_tensor(rng, y.batch, y.channels, y.length).values;
        auto f = [&] {
            T64 o;
            ad1d::nn::leaky_relu_forward(x, 0.1, o);
            return dot(o.values, R);
        };
        x.enable_grad();
        y.grad = R;
        ad1d::nn::leaky_relu_backward(x, 0.1, y);
        Case c;
        for (auto i : probe_indices(rng, x.size())) c.check(x.grad[i], central_difference(f, x.values[i]));
        c.record(s);
    }
    return s;
}

inline Summary check_shortcut(std::mt19937_64& rng, int n_cases) {
    Summary s{"shortcut"};
    std::uniform_int_distribution<int> ch(1, 4), len(2, 12);
    for (int k = 0; k < n_cases; ++k) {
        const int C = ch(rng), L = len(rng);
        T64 a = random_tensor(rng, 2, C, L), b = random_tensor(rng, 2, C, L), y;
        ad1d::nn::shortcut_forward(a, b, y);
        const auto R = random_tensor(rng, y.batch, y.channels, y.length).values;
        auto f = [&] {
            T64 o;
            ad1d::nn::shortcut_forward(a, b, o);
            return dot(o.values, R);
        };
        a.enable_grad();
        b.enable_grad();
        y.grad = R;
        ad1d::nn::shortcut_backward(a, b, y);
        Case c;
        for (auto i : probe_indices(rng, a.size())) c.check(a.grad[i], central_difference(f, a.values[i]));
        for (auto i : probe_indices(rng, b.size())) c.check(b.grad[i], central_difference(f, b.values[i]));
        c.record(s);
    }
    return s;
}

inline Summary check_route(std::mt19937_64& rng, int n_cases) {
    Summary s{"route"};
    std::uniform_int_distribution<int> ch(1, 4), len(2, 10), count(1, 3);
    for (int k = 0; k < n_cases; ++k) {
        const int L = len(rng);
        std::vector<T64> ins;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) ins.push_back(random_tensor(rng, 2, ch(rng), L));
        std::vector<const T64*> cptr;
        std::vector<T64*> ptr;
        for (auto& t : ins) {
            cptr.push_back(&t);
            ptr.push_back(&t);
        }
        T64 y;
        ad1d::nn::route_forward<double>(cptr, y);
        const auto R = random_tensor(rng, y.batch, y.channels, y.length).values;
        auto f = [&] {
            T64 o;
            ad1d::nn::route_forward<double>(cptr, o);
            return dot(o.values, R);
        };
        for (auto& t : ins) t.enable_grad();
        y.grad = R;
        ad1d::nn::route_backward<double>(ptr, y);
        Case c;
        for (auto& t : ins)
            for (auto i : probe_indices(rng, t.size(), 6)) c.check(t.grad[i], central_difference(f, t.values[i]));
        c.record(s);
    }
    return s;
}

inline Summary check_upsample(std::mt19937_64& rng, int n_cases) {
    Summary s{"upsample"};
    std::uniform_int_distribution<int> ch(1, 4), len(1, 8);
    for (int k = 0; k < n_cases; ++k) {
        T64 x = random_tensor(rng, 2, ch(rng), len(rng)), y;
        ad1d::nn::upsample_forward(x, 2, y);
        const auto R = random_tensor(rng, y.batch, y.channels, y.length).values;
        auto f = [&] {
            T64 o;
            ad1d::nn::upsample_forward(x, 2, o);
            return dot(o.values, R);
        };
        x.enable_grad();
        y.grad = R;
        ad1d::nn::upsample_backward(x, y);
        Case c;
        for (auto i : probe_indices(rng, x.size())) c.check(x.grad[i], central_difference(f, x.values[i]));
        c.record(s);
    }
    return s;
}

/// Small three-scale network: input 64, grids 2/4/8, conv + batchnorm +
/// leaky + upsample + route + shortcut, one predict layer per scale.
inline ad1d::NetworkSpec micro_spec(int n_classes = 5) {
    using ad1d::LayerKind;
    ad1d::NetworkSpec spec;
    spec.input_size = 64;
    spec.n_classes = n_classes;
    const int P = spec.prediction_channels();
    auto& L = spec.layers;
    L.push_back({.kind = LayerKind::Conv, .filters = 4, .kernel = 3, .stride = 2});              // 0: 4x32
    L.push_back({.kind = LayerKind::BatchNorm});                                                  // 1
    L.push_back({.kind = LayerKind::Activation});                                                 // 2
    L.push_back({.kind = LayerKind::Conv, .filters = 4, .kernel = 3, .stride = 2});              // 3: 4x16
    L.push_back({.kind = LayerKind::Conv, .filters = 4, .kernel = 3, .stride = 2});              // 4: 4x8
    L.push_back({.kind = LayerKind::Conv, .filters = 4, .kernel = 3, .stride = 2});              // 5: 4x4
    L.push_back({.kind = LayerKind::Conv, .filters = P, .kernel = 3, .stride = 2, .bias = true}); // 6: Px2
    L.push_back({.kind = LayerKind::Predict, .scale = 0});                                        // 7
    L.push_back({.kind = LayerKind::Route, .sources = {5}});                                      // 8: 4x4
    L.push_back({.kind = LayerKind::Upsample, .factor = 2});                                      // 9: 4x8
    L.push_back({.kind = LayerKind::Shortcut, .from = 4});                                        // 10: 4x8
    L.push_back({.kind = LayerKind::Route, .sources = {10, 4}});                                  // 11: 8x8
    L.push_back({.kind = LayerKind::Conv, .filters = P, .kernel = 1, .stride = 1, .bias = true}); // 12: Px8
    L.push_back({.kind = LayerKind::Predict, .scale = 2});                                        // 13
    L.push_back({.kind = LayerKind::Route, .sources = {5}});                                      // 14: 4x4
    L.push_back({.kind = LayerKind::Conv, .filters = P, .kernel = 1, .stride = 1, .bias = true}); // 15: Px4
    L.push_back({.kind = LayerKind::Predict, .scale = 1});                                        // 16
    return spec;
}

/// A few annotations spread over the scales of the micro network.
inline std::vector<ad1d::Annotation> random_truths(std::mt19937_64& rng, int n_classes) {
    std::uniform_real_distribution<double> ux(0.05, 0.95), uw(0.03, 0.9);
    std::uniform_int_distribution<int> uc(0, n_classes - 1), un(1, 3);
    std::vector<ad1d::Annotation> out;
    const int n = un(rng);
    for (int i = 0; i < n; ++i) out.push_back({uc(rng), ux(rng), uw(rng)});
    return out;
}

inline ad1d::AnchorSet micro_anchors() { return {{1.5, 3, 5, 7, 10, 14, 20, 32, 60}}; }

/// L_total gradient w.r.t. the raw prediction maps, with ignore flags frozen
/// at the base point.
inline Summary check_loss_maps(std::mt19937_64& rng, int n_cases) {
    Summary s{"L_total (maps)"};
    const auto spec = micro_spec();
    const auto anchors = micro_anchors();
    ad1d::LossConfig cfg;
    for (int k = 0; k < n_cases; ++k) {
        cfg.center_in_grids = k % 2 == 1;  // both center units
        std::array<T64, 3> m;
        for (int sc = 0; sc < 3; ++sc) {
            m[sc] = random_tensor(rng, 1, spec.prediction_channels(), spec.grid_count(sc));
            for (auto& v : m[sc].values) v *= 1.5;
        }
        const ad1d::PredictionMaps<double> maps{&m[0], &m[1], &m[2]};
        const auto truths = random_truths(rng, spec.n_classes);
        auto targets = ad1d::assign_targets(truths, anchors, spec);
        ad1d::mark_ignored(targets, maps, 0, truths, anchors, spec, cfg.ignore_threshold);
        auto f = [&] { return ad1d::total_loss(maps, 0, targets, anchors, spec, cfg).total(); };
        for (auto& t : m) t.enable_grad();
        ad1d::total_loss(maps, 0, targets, anchors, spec, cfg, 1.0);
        Case c;
        for (int sc = 0; sc < 3; ++sc) {
            // Probe every responsible slot channel plus random ones.
            for (auto i : probe_indices(rng, m[sc].size(), 16))
                c.check(m[sc].grad[i], central_difference(f, m[sc].values[i]));
            for (int g = 0; g < targets.grids[sc]; ++g)
                for (int slot = 0; slot < spec.n_anchors; ++slot)
                    if (targets.at(sc, g, slot).responsible)
                        for (int ch = 0; ch < 3 + spec.n_classes; ++ch) {
                            const int channel = slot * (3 + spec.n_classes) + ch;
                            double& v = m[sc].at(0, channel, g);
                            c.check(m[sc].grad_row(0, channel)[g], central_difference(f, v));
                        }
        }
        c.record(s);
    }
    return s;
}

/// End-to-end: L_total of a two-sample batch through the micro network
/// (training-phase batchnorm) w.r.t. every parameter kind and the input.
inline Summary check_loss_network(std::mt19937_64& rng, int n_cases) {
    Summary s{"L_total (network)"};
    const auto spec = micro_spec();
    const auto anchors = micro_anchors();
    ad1d::LossConfig cfg;
    const int B = 2;
    for (int k = 0; k < n_cases; ++k) {
        cfg.center_in_grids = k % 2 == 1;
        ad1d::Network<double> net(spec);
        T64 x;
        ad1d::PredictionMaps<double> maps{&net.prediction(0), &net.prediction(1), &net.prediction(2)};
        // The loss clamps probabilities at 1e-7 while its gradient keeps the
        // logistic form, so only draws whose logits stay inside the clamp
        // range are comparable with finite differences.
        for (bool inside = false; !inside;) {
            net.initialize(rng());
            std::normal_distribution<double> nd(0.0, 0.2);
            for (auto* p : net.params())
                if (p->learnable)
                    for (auto& v : p->value) v += nd(rng);
            x = random_tensor(rng, B, 1, spec.input_size);
            net.forward(x, Phase::Train);
            inside = true;
            for (const auto* m : maps)
                for (double v : m->values) inside = inside && std::abs(v) < 12.0;
        }
        std::array<std::vector<ad1d::Annotation>, B> truths{random_truths(rng, 5), random_truths(rng, 5)};
        std::array<ad1d::TargetAssignment, B> targets;
        for (int b = 0; b < B; ++b) {
            targets[b] = ad1d::assign_targets(truths[b], anchors, spec);
            ad1d::mark_ignored(targets[b], maps, b, truths[b], anchors, spec, cfg.ignore_threshold);
        }
        auto f = [&] {
            net.forward(x, Phase::Train);
            double total = 0.0;
            for (int b = 0; b < B; ++b) total += ad1d::total_loss(maps, b, targets[b], anchors, spec, cfg).total();
            return total / B;
        };
        net.forward(x, Phase::Train);
        for (int b = 0; b < B; ++b) ad1d::total_loss(maps, b, targets[b], anchors, spec, cfg, 1.0 / B);
        net.zero_param_grads();
        net.backward();
        std::vector<std::pair<double*, double>> probes;
        for (auto* p : net.params()) {
            if (!p->learnable) continue;
            for (auto i : probe_indices(rng, p->value.size(), 3)) probes.push_back({&p->value[i], p->grad[i]});
        }
        Case c;
        for (auto [ptr, analytic] : probes) c.check(analytic, central_difference(f, *ptr));
        c.record(s);
    }
    return s;
}

/// Runs every check; `scale` multiplies the per-kind case counts.
inline std::vector<Summary> run_all(std::uint64_t seed, int scale = 1) {
    std::mt19937_64 rng(seed);
    return {check_conv(rng, 30 * scale),       check_batchnorm(rng, 30 * scale), check_leaky(rng, 20 * scale),
            check_shortcut(rng, 20 * scale),   check_route(rng, 20 * scale),     check_upsample(rng, 20 * scale),
            check_loss_maps(rng, 40 * scale),  check_loss_network(rng, 15 * scale)};
}

}  // namespace gradcheck
