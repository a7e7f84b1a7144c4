#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ad1d/network_spec.hpp"
#include "ad1d/nn/layers.hpp"
#include "ad1d/weight_store.hpp"

namespace ad1d {

/// Executable layer graph built from a NetworkSpec. Instances own their
/// activation buffers, so one instance serves one thread at a time; share
/// weights across threads through WeightStore instead.
template <typename T>
class Network {
public:
    struct Layer {
        LayerDesc desc;
        nn::ConvParams<T> conv;
        nn::BatchNormParams<T> bn;
        nn::BatchNormCache<T> bn_cache;
        nn::Tensor1D<T> out;
    };

    explicit Network(NetworkSpec spec, T leaky_slope = T(nn::kDefaultLeakySlope))
        : spec_(std::move(spec)), slope_(leaky_slope) {
        spec_.validate();
        int channels = 1;
        std::vector<int> out_channels;
        out_channels.reserve(spec_.layers.size());
        auto channels_of = [&](int idx) { return idx < 0 ? 1 : out_channels[idx]; };
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            Layer layer;
            layer.desc = spec_.layers[i];
            const auto& d = layer.desc;
            switch (d.kind) {
                case LayerKind::Conv:
                    layer.conv = nn::make_conv<T>(channels, d.filters, d.kernel, d.stride, d.bias);
                    channels = d.filters;
                    break;
                case LayerKind::BatchNorm: layer.bn = nn::make_batchnorm<T>(channels); break;
                case LayerKind::Route:
                    channels = 0;
                    for (int s : d.sources) channels += channels_of(s);
                    break;
                default: break;
            }
            const std::string prefix = "layer" + std::to_string(i);
            layer.conv.weights.name = prefix + ".conv.weights";
            layer.conv.bias.name = prefix + ".conv.bias";
            layer.bn.gamma.name = prefix + ".bn.gamma";
            layer.bn.beta.name = prefix + ".bn.beta";
            layer.bn.running_mean.name = prefix + ".bn.running_mean";
            layer.bn.running_var.name = prefix + ".bn.running_var";
            out_channels.push_back(channels);
            if (d.kind == LayerKind::Predict) predict_index_[d.scale] = static_cast<int>(i);
            layers_.push_back(std::move(layer));
        }
    }

    const NetworkSpec& spec() const { return spec_; }
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_[i]; }
    Layer& layer(std::size_t i) { return layers_[i]; }

    /// Fan-in scaled uniform init for conv kernels; gamma=1, beta=0, bias=0.
    void initialize(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (auto& l : layers_) {
            if (l.desc.kind == LayerKind::Conv) {
                const double fan_in = static_cast<double>(l.conv.in_channels) * l.conv.kernel_size;
                const double gain = l.desc.bias ? 1.0 : std::sqrt(2.0 / (1.0 + double(slope_) * double(slope_)));
                const double bound = gain * std::sqrt(3.0 / fan_in);
                std::uniform_real_distribution<double> dist(-bound, bound);
                for (auto& w : l.conv.weights.value) w = static_cast<T>(dist(rng));
                std::fill(l.conv.bias.value.begin(), l.conv.bias.value.end(), T(0));
            } else if (l.desc.kind == LayerKind::BatchNorm) {
                std::fill(l.bn.gamma.value.begin(), l.bn.gamma.value.end(), T(1));
                std::fill(l.bn.beta.value.begin(), l.bn.beta.value.end(), T(0));
                std::fill(l.bn.running_mean.value.begin(), l.bn.running_mean.value.end(), T(0));
                std::fill(l.bn.running_var.value.begin(), l.bn.running_var.value.end(), T(1));
            }
        }
    }

    /// Runs the graph. In the training phase every activation gets a zeroed
    /// gradient buffer ready for `backward`.
    void forward(const nn::Tensor1D<T>& input, nn::Phase phase) {
        if (input.channels != 1 || input.length != spec_.input_size)
            throw InputError("network input must be 1x" + std::to_string(spec_.input_size) + ", got " +
                             std::to_string(input.channels) + "x" + std::to_string(input.length));
        input_.batch = input.batch;
        input_.channels = 1;
        input_.length = input.length;
        input_.values = input.values;
        input_.grad.clear();
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto& l = layers_[i];
            const auto& in = input_of(i);
            switch (l.desc.kind) {
                case LayerKind::Conv: nn::conv1d_forward(in, l.conv, l.out); break;
                case LayerKind::BatchNorm: nn::batchnorm_forward(in, l.bn, phase, l.out, l.bn_cache); break;
                case LayerKind::Activation: nn::leaky_relu_forward(in, slope_, l.out); break;
                case LayerKind::Shortcut: nn::shortcut_forward(in, output_of(l.desc.from), l.out); break;
                case LayerKind::Route: {
                    std::vector<const nn::Tensor1D<T>*> srcs;
                    for (int s : l.desc.sources) srcs.push_back(&output_of(s));
                    nn::route_forward<T>(srcs, l.out);
                    break;
                }
                case LayerKind::Upsample: nn::upsample_forward(in, l.desc.factor, l.out); break;
                case LayerKind::Predict:
                    if (!l.out.same_shape(in)) l.out.reshape(in.batch, in.channels, in.length);
                    l.out.values = in.values;
                    break;
            }
            if (phase == nn::Phase::Train) {
                if (l.out.grad.size() != l.out.values.size())
                    l.out.enable_grad();
                else
                    l.out.zero_grad();
            } else {
                l.out.grad.clear();
            }
        }
    }

    /// Back-propagates gradients previously written into the prediction maps.
    void backward() {
        for (std::size_t ii = layers_.size(); ii-- > 0;) {
            auto& l = layers_[ii];
            auto& in = input_of(ii);
            switch (l.desc.kind) {
                case LayerKind::Conv: nn::conv1d_backward(in, l.conv, l.out); break;
                case LayerKind::BatchNorm: nn::batchnorm_backward(in, l.bn, l.out, l.bn_cache); break;
                case LayerKind::Activation: nn::leaky_relu_backward(in, slope_, l.out); break;
                case LayerKind::Shortcut: nn::shortcut_backward(in, output_of(l.desc.from), l.out); break;
                case LayerKind::Route: {
                    std::vector<nn::Tensor1D<T>*> srcs;
                    for (int s : l.desc.sources) srcs.push_back(&output_of(s));
                    nn::route_backward<T>(srcs, l.out);
                    break;
                }
                case LayerKind::Upsample: nn::upsample_backward(in, l.out); break;
                case LayerKind::Predict:
                    if (in.has_grad())
                        for (std::size_t k = 0; k < in.size(); ++k) in.grad[k] += l.out.grad[k];
                    break;
            }
        }
    }

    const nn::Tensor1D<T>& prediction(int scale) const { return layers_[predict_index_[scale]].out; }
    nn::Tensor1D<T>& prediction(int scale) { return layers_[predict_index_[scale]].out; }

    /// Parameter blocks in layer order (conv weights, bias; bn gamma, beta,
    /// running mean, running var).
    std::vector<nn::ParamBlock<T>*> params() {
        std::vector<nn::ParamBlock<T>*> out;
        for (auto& l : layers_) {
            if (l.desc.kind == LayerKind::Conv) {
                out.push_back(&l.conv.weights);
                if (l.conv.has_bias()) out.push_back(&l.conv.bias);
            } else if (l.desc.kind == LayerKind::BatchNorm) {
                out.push_back(&l.bn.gamma);
                out.push_back(&l.bn.beta);
                out.push_back(&l.bn.running_mean);
                out.push_back(&l.bn.running_var);
            }
        }
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : params())
            if (p->learnable) n += p->value.size();
        return n;
    }

    void zero_param_grads() {
        for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
    }

    WeightStore export_weights() const {
        WeightStore store;
        int layer_idx = 0;
        for (const auto& l : layers_) {
            auto add = [&](const nn::ParamBlock<T>& p) {
                WeightBlock b;
                b.name = p.name;
                b.layer = layer_idx;
                b.learnable = p.learnable;
                b.decay = p.decay;
                b.values.assign(p.value.begin(), p.value.end());
                store.blocks.push_back(std::move(b));
            };
            if (l.desc.kind == LayerKind::Conv) {
                add(l.conv.weights);
                if (l.conv.has_bias()) add(l.conv.bias);
            } else if (l.desc.kind == LayerKind::BatchNorm) {
                add(l.bn.gamma);
                add(l.bn.beta);
                add(l.bn.running_mean);
                add(l.bn.running_var);
            }
            ++layer_idx;
        }
        return store;
    }

    void import_weights(const WeightStore& store) {
        auto ps = params();
        if (ps.size() != store.blocks.size())
            throw ConfigError("weight store has " + std::to_string(store.blocks.size()) + " blocks, network expects " +
                              std::to_string(ps.size()));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (ps[i]->value.size() != store.blocks[i].values.size())
                throw ConfigError("weight block " + store.blocks[i].name + " has " +
                                  std::to_string(store.blocks[i].values.size()) + " values, expected " +
                                  std::to_string(ps[i]->value.size()));
            std::transform(store.blocks[i].values.begin(), store.blocks[i].values.end(), ps[i]->value.begin(),
                           [](float v) { return static_cast<T>(v); });
        }
    }

private:
    nn::Tensor1D<T>& output_of(int idx) { return idx < 0 ? input_ : layers_[idx].out; }
    nn::Tensor1D<T>& input_of(std::size_t i) { return output_of(static_cast<int>(i) - 1); }

    NetworkSpec spec_;
    T slope_;
    std::vector<Layer> layers_;
    std::array<int, 3> predict_index_{-1, -1, -1};
    nn::Tensor1D<T> input_;
};

}  // namespace ad1d
