#pragma once

// Forward and backward passes for every layer type the detector uses.
// All kernels are templates so the same code runs in 32-bit for production
// and in 64-bit for gradient checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ad1d/nn/tensor.hpp"

namespace ad1d::nn {

enum class Phase { Train, Infer };

constexpr double kDefaultLeakySlope = 0.1;

// ---------------------------------------------------------------------------
// Scalar helpers

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

/// In-place softmax, shifted by the maximum for stability.
template <typename T>
void softmax(std::span<T> v) {
    if (v.empty()) return;
    const T mx = *std::max_element(v.begin(), v.end());
    T sum = T(0);
    for (auto& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : v) x /= sum;
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
struct ConvParams {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 1;
    int stride = 1;
    int zero_pad = 0;
    ParamBlock<T> weights;  // [out][in][kernel]
    ParamBlock<T> bias;     // [out], empty when a batchnorm follows

    bool has_bias() const { return !bias.value.empty(); }
    int output_length(int length) const { return (length + 2 * zero_pad - kernel_size) / stride + 1; }
};

template <typename T>
ConvParams<T> make_conv(int in_channels, int out_channels, int kernel_size, int stride, bool with_bias) {
    if (in_channels <= 0 || out_channels <= 0)
        throw ConfigError("conv1d: channel counts must be positive");
    if (kernel_size != 1 && kernel_size != 3) throw ConfigError("conv1d: kernel size must be 1 or 3");
    if (stride != 1 && stride != 2) throw ConfigError("conv1d: stride must be 1 or 2");
    ConvParams<T> p;
    p.in_channels = in_channels;
    p.out_channels = out_channels;
    p.kernel_size = kernel_size;
    p.stride = stride;
    p.zero_pad = (kernel_size - 1) / 2;
    p.weights.name = "weights";
    p.weights.decay = true;
    p.weights.resize(static_cast<std::size_t>(out_channels) * in_channels * kernel_size);
    if (with_bias) {
        p.bias.name = "bias";
        p.bias.resize(out_channels);
    }
    return p;
}

namespace detail {

// Copies each channel row into a zero-padded scratch row of length + 2*pad.
template <typename T>
void pad_rows(const T* src, int channels, int length, int pad, std::vector<T>& dst) {
    const int padded = length + 2 * pad;
    dst.assign(static_cast<std::size_t>(channels) * padded, T(0));
    for (int c = 0; c < channels; ++c)
        std::copy_n(src + static_cast<std::size_t>(c) * length, length,
                    dst.data() + static_cast<std::size_t>(c) * padded + pad);
}

}  // namespace detail

template <typename T>
void conv1d_forward(const Tensor1D<T>& in, const ConvParams<T>& p, Tensor1D<T>& out) {
    if (in.channels != p.in_channels)
        throw ConfigError("conv1d: input has " + std::to_string(in.channels) + " channels, expected " +
                          std::to_string(p.in_channels));
    const int L = in.length;
    const int Lout = p.output_length(L);
    if (Lout <= 0) throw ConfigError("conv1d: input too short");
    if (out.batch != in.batch || out.channels != p.out_channels || out.length != Lout)
        out.reshape(in.batch, p.out_channels, Lout);

    const int K = p.kernel_size;
    const int S = p.stride;
    const int padded = L + 2 * p.zero_pad;
    thread_local std::vector<T> scratch;
    const T* W = p.weights.value.data();

    for (int b = 0; b < in.batch; ++b) {
        const T* src;
        if (p.zero_pad > 0) {
            detail::pad_rows(in.values.data() + b * in.sample_stride(), in.channels, L, p.zero_pad, scratch);
            src = scratch.data();
        } else {
            src = in.values.data() + b * in.sample_stride();
        }
        for (int o = 0; o < p.out_channels; ++o) {
            T* acc = out.values.data() + b * out.sample_stride() + static_cast<std::size_t>(o) * Lout;
            const T init = p.has_bias() ? p.bias.value[o] : T(0);
            std::fill_n(acc, Lout, init);
            const T* wo = W + static_cast<std::size_t>(o) * p.in_channels * K;
            for (int i = 0; i < p.in_channels; ++i) {
                const T* s = src + static_cast<std::size_t>(i) * padded;
                const T* w = wo + static_cast<std::size_t>(i) * K;
                if (K == 1 && S == 1) {
                    const T w0 = w[0];
                    for (int x = 0; x < Lout; ++x) acc[x] += w0 * s[x];
                } else if (K == 3 && S == 1) {
                    const T w0 = w[0], w1 = w[1], w2 = w[2];
                    for (int x = 0; x < Lout; ++x) acc[x] += w0 * s[x] + w1 * s[x + 1] + w2 * s[x + 2];
                } else if (K == 3) {
                    const T w0 = w[0], w1 = w[1], w2 = w[2];
                    for (int x = 0; x < Lout; ++x) {
                        const T* t = s + x * S;
                        acc[x] += w0 * t[0] + w1 * t[1] + w2 * t[2];
                    }
                } else {
                    const T w0 = w[0];
                    for (int x = 0; x < Lout; ++x) acc[x] += w0 * s[x * S];
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients into `p` and, when `in` carries a
/// gradient buffer, the input gradient into `in.grad`.
template <typename T>
void conv1d_backward(Tensor1D<T>& in, ConvParams<T>& p, const Tensor1D<T>& out) {
    if (!out.has_grad()) throw ConfigError("conv1d backward: output has no gradient");
    const int L = in.length;
    const int Lout = out.length;
    const int K = p.kernel_size;
    const int S = p.stride;
    const int pad = p.zero_pad;
    const int padded = L + 2 * pad;
    thread_local std::vector<T> scratch;
    thread_local std::vector<T> gpad;
    const bool want_input_grad = in.has_grad();
    const T* W = p.weights.value.data();
    T* GW = p.weights.grad.data();

    for (int b = 0; b < in.batch; ++b) {
        const T* src;
        if (pad > 0) {
            detail::pad_rows(in.values.data() + b * in.sample_stride(), in.channels, L, pad, scratch);
            src = scratch.data();
        } else {
            src = in.values.data() + b * in.sample_stride();
        }
        if (want_input_grad) gpad.assign(static_cast<std::size_t>(in.channels) * padded, T(0));

        for (int o = 0; o < p.out_channels; ++o) {
            const T* g = out.grad.data() + b * out.sample_stride() + static_cast<std::size_t>(o) * Lout;
            if (p.has_bias()) {
                T sum = T(0);
                for (int x = 0; x < Lout; ++x) sum += g[x];
                p.bias.grad[o] += sum;
            }
            const std::size_t wo = static_cast<std::size_t>(o) * p.in_channels * K;
            for (int i = 0; i < p.in_channels; ++i) {
                const T* s = src + static_cast<std::size_t>(i) * padded;
                T* gi = want_input_grad ? gpad.data() + static_cast<std::size_t>(i) * padded : nullptr;
                for (int k = 0; k < K; ++k) {
                    const std::size_t widx = wo + static_cast<std::size_t>(i) * K + k;
                    const T w = W[widx];
                    T acc = T(0);
                    if (S == 1) {
                        const T* t = s + k;
                        for (int x = 0; x < Lout; ++x) acc += g[x] * t[x];
                        if (gi) {
                            T* d = gi + k;
                            for (int x = 0; x < Lout; ++x) d[x] += w * g[x];
                        }
                    } else {
                        for (int x = 0; x < Lout; ++x) acc += g[x] * s[x * S + k];
                        if (gi)
                            for (int x = 0; x < Lout; ++x) gi[x * S + k] += w * g[x];
                    }
                    GW[widx] += acc;
                }
            }
        }

        if (want_input_grad) {
            for (int i = 0; i < in.channels; ++i) {
                T* dst = in.grad.data() + b * in.sample_stride() + static_cast<std::size_t>(i) * L;
                const T* from = gpad.data() + static_cast<std::size_t>(i) * padded + pad;
                for (int x = 0; x < L; ++x) dst[x] += from[x];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
struct BatchNormParams {
    int channels = 0;
    ParamBlock<T> gamma;
    ParamBlock<T> beta;
    ParamBlock<T> running_mean;
    ParamBlock<T> running_var;
    T epsilon = T(1e-5);
    T momentum = T(0.9);
};

template <typename T>
BatchNormParams<T> make_batchnorm(int channels) {
    if (channels <= 0) throw ConfigError("batchnorm: channel count must be positive");
    BatchNormParams<T> p;
    p.channels = channels;
    p.gamma.name = "gamma";
    p.gamma.resize(channels, T(1));
    p.beta.name = "beta";
    p.beta.resize(channels, T(0));
    p.running_mean.name = "running_mean";
    p.running_mean.learnable = false;
    p.running_mean.resize(channels, T(0));
    p.running_var.name = "running_var";
    p.running_var.learnable = false;
    p.running_var.resize(channels, T(1));
    return p;
}

/// Forward context kept for the backward pass.
template <typename T>
struct BatchNormCache {
    Phase phase = Phase::Infer;
    std::vector<T> xhat;     // normalized input, same layout as the tensor
    std::vector<T> inv_std;  // per channel
};

template <typename T>
void batchnorm_forward(const Tensor1D<T>& in, BatchNormParams<T>& p, Phase phase, Tensor1D<T>& out,
                       BatchNormCache<T>& cache) {
    if (in.channels != p.channels) throw ConfigError("batchnorm: channel mismatch");
    if (in.batch < 1) throw ConfigError("batchnorm: empty batch");
    if (!out.same_shape(in)) out.reshape(in.batch, in.channels, in.length);
    const int L = in.length;
    const std::size_t n = static_cast<std::size_t>(in.batch) * L;
    cache.phase = phase;
    cache.inv_std.assign(p.channels, T(0));
    if (phase == Phase::Train) cache.xhat.resize(in.size());

    for (int c = 0; c < p.channels; ++c) {
        T mean, inv_std;
        if (phase == Phase::Train) {
            double sum = 0.0;
            for (int b = 0; b < in.batch; ++b)
                for (T v : in.row(b, c)) sum += v;
            const double m = sum / static_cast<double>(n);
            double sq = 0.0;
            for (int b = 0; b < in.batch; ++b)
                for (T v : in.row(b, c)) sq += (v - m) * (v - m);
            const double var = sq / static_cast<double>(n);
            mean = static_cast<T>(m);
            inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(p.epsilon)));
            auto& rm = p.running_mean.value[c];
            auto& rv = p.running_var.value[c];
            rm = p.momentum * rm + (T(1) - p.momentum) * mean;
            rv = p.momentum * rv + (T(1) - p.momentum) * static_cast<T>(var);
        } else {
            mean = p.running_mean.value[c];
            inv_std = T(1) / std::sqrt(std::max(p.running_var.value[c], T(0)) + p.epsilon);
        }
        cache.inv_std[c] = inv_std;
        const T g = p.gamma.value[c];
        const T be = p.beta.value[c];
        for (int b = 0; b < in.batch; ++b) {
            auto src = in.row(b, c);
            auto dst = out.row(b, c);
            if (phase == Phase::Train) {
                T* xh = cache.xhat.data() + (src.data() - in.values.data());
                for (int x = 0; x < L; ++x) {
                    xh[x] = (src[x] - mean) * inv_std;
                    dst[x] = g * xh[x] + be;
                }
            } else {
                const T scale = g * inv_std;
                const T shift = be - mean * scale;
                for (int x = 0; x < L; ++x) dst[x] = src[x] * scale + shift;
            }
        }
    }
}

template <typename T>
void batchnorm_backward(Tensor1D<T>& in, BatchNormParams<T>& p, const Tensor1D<T>& out,
                        const BatchNormCache<T>& cache) {
    const int L = in.length;
    const T n = static_cast<T>(static_cast<std::size_t>(in.batch) * L);
    const bool want_input_grad = in.has_grad();
    for (int c = 0; c < p.channels; ++c) {
        const T g = p.gamma.value[c];
        const T inv_std = cache.inv_std[c];
        if (cache.phase == Phase::Infer) {
            T dgamma = T(0), dbeta = T(0);
            const T mean = p.running_mean.value[c];
            for (int b = 0; b < in.batch; ++b) {
                auto gy = out.grad_row(b, c);
                auto xs = in.row(b, c);
                for (int x = 0; x < L; ++x) {
                    dbeta += gy[x];
                    dgamma += gy[x] * (xs[x] - mean) * inv_std;
                    if (want_input_grad) in.grad_row(b, c)[x] += gy[x] * g * inv_std;
                }
            }
            p.gamma.grad[c] += dgamma;
            p.beta.grad[c] += dbeta;
            continue;
        }
        T dgamma = T(0), dbeta = T(0);
        for (int b = 0; b < in.batch; ++b) {
            auto gy = out.grad_row(b, c);
            const T* xh = cache.xhat.data() + (in.row(b, c).data() - in.values.data());
            for (int x = 0; x < L; ++x) {
                dbeta += gy[x];
                dgamma += gy[x] * xh[x];
            }
        }
        p.gamma.grad[c] += dgamma;
        p.beta.grad[c] += dbeta;
        if (!want_input_grad) continue;
        const T k = g * inv_std / n;
        for (int b = 0; b < in.batch; ++b) {
            auto gy = out.grad_row(b, c);
            auto gx = in.grad_row(b, c);
            const T* xh = cache.xhat.data() + (in.row(b, c).data() - in.values.data());
            for (int x = 0; x < L; ++x) gx[x] += k * (n * gy[x] - dbeta - xh[x] * dgamma);
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise and structural layers

template <typename T>
void leaky_relu_forward(const Tensor1D<T>& in, T slope, Tensor1D<T>& out) {
    if (!out.same_shape(in)) out.reshape(in.batch, in.channels, in.length);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const T v = in.values[i];
        out.values[i] = v >= T(0) ? v : slope * v;
    }
}

template <typename T>
void leaky_relu_backward(Tensor1D<T>& in, T slope, const Tensor1D<T>& out) {
    if (!in.has_grad()) return;
    for (std::size_t i = 0; i < in.size(); ++i)
        in.grad[i] += in.values[i] >= T(0) ? out.grad[i] : slope * out.grad[i];
}

template <typename T>
void shortcut_forward(const Tensor1D<T>& a, const Tensor1D<T>& b, Tensor1D<T>& out) {
    if (!a.same_shape(b))
        throw ConfigError("shortcut: shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    if (!out.same_shape(a)) out.reshape(a.batch, a.channels, a.length);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] + b.values[i];
}

template <typename T>
void shortcut_backward(Tensor1D<T>& a, Tensor1D<T>& b, const Tensor1D<T>& out) {
    if (a.has_grad())
        for (std::size_t i = 0; i < a.size(); ++i) a.grad[i] += out.grad[i];
    if (b.has_grad())
        for (std::size_t i = 0; i < b.size(); ++i) b.grad[i] += out.grad[i];
}

template <typename T>
void route_forward(std::span<const Tensor1D<T>* const> inputs, Tensor1D<T>& out) {
    if (inputs.empty()) throw ConfigError("route: no inputs");
    int channels = 0;
    for (const auto* t : inputs) {
        if (t->length != inputs[0]->length || t->batch != inputs[0]->batch)
            throw ConfigError("route: length mismatch " + shape_string(*t) + " vs " + shape_string(*inputs[0]));
        channels += t->channels;
    }
    const int B = inputs[0]->batch;
    const int L = inputs[0]->length;
    if (out.batch != B || out.channels != channels || out.length != L) out.reshape(B, channels, L);
    for (int b = 0; b < B; ++b) {
        T* dst = out.values.data() + b * out.sample_stride();
        for (const auto* t : inputs) {
            dst = std::copy_n(t->values.data() + b * t->sample_stride(), t->sample_stride(), dst);
        }
    }
}

template <typename T>
void route_backward(std::span<Tensor1D<T>* const> inputs, const Tensor1D<T>& out) {
    for (int b = 0; b < out.batch; ++b) {
        const T* src = out.grad.data() + b * out.sample_stride();
        for (auto* t : inputs) {
            const std::size_t n = t->sample_stride();
            if (t->has_grad()) {
                T* dst = t->grad.data() + b * n;
                for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
            }
            src += n;
        }
    }
}

template <typename T>
void upsample_forward(const Tensor1D<T>& in, int factor, Tensor1D<T>& out) {
    if (factor != 2) throw ConfigError("upsample: only factor 2 is supported");
    const int L = in.length;
    if (out.batch != in.batch || out.channels != in.channels || out.length != 2 * L)
        out.reshape(in.batch, in.channels, 2 * L);
    for (std::size_t r = 0; r < static_cast<std::size_t>(in.batch) * in.channels; ++r) {
        const T* s = in.values.data() + r * L;
        T* d = out.values.data() + r * 2 * L;
        for (int x = 0; x < L; ++x) d[2 * x] = d[2 * x + 1] = s[x];
    }
}

template <typename T>
void upsample_backward(Tensor1D<T>& in, const Tensor1D<T>& out) {
    if (!in.has_grad()) return;
    const int L = in.length;
    for (std::size_t r = 0; r < static_cast<std::size_t>(in.batch) * in.channels; ++r) {
        const T* g = out.grad.data() + r * 2 * L;
        T* d = in.grad.data() + r * L;
        for (int x = 0; x < L; ++x) d[x] += g[2 * x] + g[2 * x + 1];
    }
}

}  // namespace ad1d::nn
