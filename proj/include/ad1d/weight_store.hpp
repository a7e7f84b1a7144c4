#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ad1d {

/// One flat block of 32-bit parameters. Running batchnorm statistics are
/// stored alongside learnable blocks but flagged non-learnable.
struct WeightBlock {
    std::string name;
    int layer = 0;
    bool learnable = true;
    bool decay = false;
    std::vector<float> values;

    bool operator==(const WeightBlock&) const = default;
};

/// All parameters of a network in layer order.
struct WeightStore {
    std::vector<WeightBlock> blocks;

    std::size_t learnable_count() const {
        std::size_t n = 0;
        for (const auto& b : blocks)
            if (b.learnable) n += b.values.size();
        return n;
    }
    std::size_t total_count() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.values.size();
        return n;
    }
    bool operator==(const WeightStore&) const = default;
};

}  // namespace ad1d
