#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ad1d/error.hpp"
#include "ad1d/nn/tensor.hpp"

namespace ad1d {

/// Burn-in schedule: target * (batches / burn_in)^4 until burn_in, then target.
inline double lr_schedule(long long batches, double target, long long burn_in) {
    if (burn_in <= 0 || batches >= burn_in) return target;
    const double r = static_cast<double>(std::max(0LL, batches)) / static_cast<double>(burn_in);
    return std::min(target * r * r * r * r, target);
}

/// SGD with momentum; weight decay on blocks flagged `decay` (conv kernels).
///   v <- momentum * v - lr * (grad + decay * w);  w <- w + v
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<nn::ParamBlock<T>*>& params, double lr) {
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (const auto* p : params) velocity_.emplace_back(p->learnable ? p->value.size() : 0, T(0));
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = *params[k];
            if (!p.learnable) continue;
            for (T g : p.grad)
                if (!std::isfinite(static_cast<double>(g)))
                    throw NumericError("non-finite gradient in parameter block " + std::to_string(k) + " (" + p.name +
                                       ")");
            const T decay = p.decay ? static_cast<T>(weight_decay_) : T(0);
            const T m = static_cast<T>(momentum_);
            const T a = static_cast<T>(lr);
            auto& v = velocity_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                v[i] = m * v[i] - a * (p.grad[i] + decay * p.value[i]);
                p.value[i] += v[i];
            }
        }
    }

    void reset() { velocity_.clear(); }

private:
    double momentum_;
    double weight_decay_;
    std::vector<std::vector<T>> velocity_;
};

}  // namespace ad1d
