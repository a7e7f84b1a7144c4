#include "ad1d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "ad1d/error.hpp"

namespace ad1d {

namespace {

enum Cls { kLte = 0, kWave = 1, kRollOff = 2, kSuckOut = 3, kSpike = 4 };

constexpr int kGap = 8;  // minimum spacing between non-wave impairments

struct Canvas {
    int n;
    double sigma;
    std::vector<double> offset;
    std::vector<double> extra_sigma;
    std::vector<std::pair<int, int>> occupied;  // non-wave spans [a, b)
    bool has_wave = false;
    bool left_roll = false;
    bool right_roll = false;
    std::vector<Annotation> labels;

    bool is_free(int a, int b) const {
        for (auto [oa, ob] : occupied)
            if (a < ob + kGap && oa < b + kGap) return false;
        return true;
    }
    void label(int cls, double start, double width) {
        labels.push_back({cls, (start + width / 2) / n, width / n});
    }
};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Input cells (of `cells` after min-binning a series of length n) that
// contain any of the sub-carriers [a, b).
std::pair<int, int> covered_cells(int n, int cells, int a, int b) {
    const long long bin = (n + cells - 1) / cells;
    const long long stretched = bin * cells;
    int lo = cells, hi = -1;
    for (long long j = 0; j < stretched; ++j) {
        const long long src = j * n / stretched;
        if (src >= a && src < b) {
            lo = std::min(lo, static_cast<int>(j / bin));
            hi = std::max(hi, static_cast<int>(j / bin));
        }
    }
    return {lo, hi};
}

bool add_spike(Canvas& c, Rng& rng, int input_size) {
    const int k = uniform_int(rng, 1, 3);
    const int a = uniform_int(rng, 4, c.n - k - 4);
    // The label is placed in input cells: down-sampling hides where inside a
    // cell the dip sits, so the box is centered on the cells showing the dip
    // and one cell wider than them (2 or 3 cells).
    const auto [lo, hi] = covered_cells(c.n, input_size, a, a + k);
    const double cell = static_cast<double>(c.n) / input_size;
    const double start = (lo - 0.5) * cell;
    const double width = (hi - lo + 2) * cell;
    const int la = static_cast<int>(std::floor(start));
    const int lb = static_cast<int>(std::ceil(start + width));
    if (la < 0 || lb > c.n || !c.is_free(la, lb)) return false;
    const double depth = uniform(rng, 6.0, 30.0);
    for (int i = a; i < a + k; ++i) c.offset[i] -= depth * uniform(rng, 0.7, 1.0);
    c.occupied.emplace_back(la, lb);
    c.label(kSpike, start, width);
    return true;
}

// Band widths are drawn in input cells and converted to sub-carriers.
int cells_to_subcarriers(const Canvas& c, int cells, int input_size) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(cells) * c.n / input_size)));
}

bool add_suck_out(Canvas& c, Rng& rng, int input_size) {
    const int w = cells_to_subcarriers(c, uniform_int(rng, 10, 120), input_size);
    const int a = uniform_int(rng, 0, c.n - w);
    if (!c.is_free(a, a + w)) return false;
    const double tip = a + w * uniform(rng, 0.3, 0.7);
    const double depth = uniform(rng, 5.0, 25.0);
    const double p_left = uniform(rng, 1.0, 2.5);
    const double p_right = uniform(rng, 1.0, 2.5);
    for (int i = a; i < a + w; ++i) {
        const double xc = i + 0.5;
        const double t = xc < tip ? (xc - a) / (tip - a) : (a + w - xc) / (a + w - tip);
        c.offset[i] -= depth * std::pow(std::clamp(t, 0.0, 1.0), xc < tip ? p_left : p_right);
    }
    c.occupied.emplace_back(a, a + w);
    c.label(kSuckOut, a, w);
    return true;
}

bool add_lte(Canvas& c, Rng& rng, int input_size) {
    const int w = cells_to_subcarriers(c, uniform_int(rng, 40, 120), input_size);
    const int a = uniform_int(rng, 0, c.n - w);
    if (!c.is_free(a, a + w)) return false;
    const double depth = uniform(rng, 8.0, 25.0);
    const double noisy = std::max(1.0, c.sigma * uniform(rng, 2.0, 4.0));
    for (int i = a; i < a + w; ++i) {
        c.offset[i] -= depth;
        c.extra_sigma[i] = noisy;
    }
    c.occupied.emplace_back(a, a + w);
    c.label(kLte, a, w);
    return true;
}

bool add_roll_off(Canvas& c, Rng& rng) {
    bool right = uniform_int(rng, 0, 1) == 1;
    if (right ? c.right_roll : c.left_roll) right = !right;
    if (right ? c.right_roll : c.left_roll) return false;
    const int r = static_cast<int>(std::lround(uniform(rng, 0.03, 0.15) * c.n));
    const int a = right ? c.n - r : 0;
    if (!c.is_free(a, a + r)) return false;
    const double drop = uniform(rng, 5.0, 40.0);
    const double p = uniform(rng, 1.5, 3.0);
    for (int j = 0; j < r; ++j) {
        const double t = (j + 0.5) / r;  // 1 at the band edge
        const int i = right ? a + j : r - 1 - j;
        c.offset[i] -= drop * std::pow(t, p);
    }
    (right ? c.right_roll : c.left_roll) = true;
    c.occupied.emplace_back(a, a + r);
    c.label(kRollOff, a, r);
    return true;
}

bool add_wave(Canvas& c, Rng& rng) {
    if (c.has_wave) return false;
    const int e = static_cast<int>(std::lround(uniform(rng, 0.2, 1.0) * c.n));
    const int a = uniform_int(rng, 0, c.n - e);
    // Keep a period at least 40 sub-carriers so the ripple survives binning.
    const int max_periods = std::clamp(e / 40, 3, 40);
    const int periods = uniform_int(rng, 3, max_periods);
    const double amp = uniform(rng, std::max(1.0, 2.0 * c.sigma), 6.0);
    for (int i = a; i < a + e; ++i)
        c.offset[i] -= amp * std::sin(2.0 * std::numbers::pi * periods * (i + 0.5 - a) / e);
    c.has_wave = true;
    c.label(kWave, a, e);
    return true;
}

}  // namespace

ClassMix ClassMix::parse(const std::string& text) {
    if (text.empty() || text == "uniform") return uniform();
    ClassMix mix;
    mix.weights.fill(0.0);
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("class mix entry '" + item + "' is not name=weight");
        int cls = 0;
        try {
            cls = class_index(item.substr(0, eq));
        } catch (const InputError& e) {
            throw ConfigError(std::string("class mix: ") + e.what());
        }
        try {
            mix.weights[cls] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("class mix weight in '" + item + "' is not a number");
        }
        if (mix.weights[cls] < 0.0) throw ConfigError("class mix weights must be non-negative");
    }
    double total = 0.0;
    for (double w : mix.weights) total += w;
    if (!(total > 0.0)) throw ConfigError("class mix has no positive weight");
    return mix;
}

Sample generate_sample(std::uint64_t seed, std::uint64_t index, const ClassMix& mix, const SyntheticConfig& cfg) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    Rng rng(seq);

    Canvas c;
    c.n = uniform_int(rng, cfg.min_length, cfg.max_length);
    const double base = uniform(rng, 35.0, 45.0);
    c.sigma = uniform(rng, 0.3, 1.5);
    c.offset.assign(c.n, 0.0);
    c.extra_sigma.assign(c.n, 0.0);

    int count = 0;
    if (uniform(rng, 0.0, 1.0) >= cfg.empty_probability) count = uniform_int(rng, 1, cfg.max_impairments);
    std::discrete_distribution<int> pick(mix.weights.begin(), mix.weights.end());
    for (int k = 0; k < count; ++k) {
        const int cls = pick(rng);
        for (int attempt = 0; attempt < 20; ++attempt) {
            bool placed = false;
            switch (cls) {
                case kLte: placed = add_lte(c, rng, cfg.input_size); break;
                case kWave: placed = add_wave(c, rng); break;
                case kRollOff: placed = add_roll_off(c, rng); break;
                case kSuckOut: placed = add_suck_out(c, rng, cfg.input_size); break;
                case kSpike: placed = add_spike(c, rng, cfg.input_size); break;
            }
            if (placed || cls == kWave) break;
        }
    }

    Sample s;
    s.source = SampleSource::Synthetic;
    s.values.resize(c.n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < c.n; ++i) {
        double v = base + c.offset[i] + c.sigma * gauss(rng);
        if (c.extra_sigma[i] > 0.0) v += c.extra_sigma[i] * gauss(rng);
        v = std::clamp(std::round(v * 4.0) / 4.0, 0.0, kMaxMer);
        s.values[i] = static_cast<float>(v);
    }
    std::sort(c.labels.begin(), c.labels.end(), [](const Annotation& a, const Annotation& b) { return a.x < b.x; });
    s.annotations = std::move(c.labels);
    return s;
}

Dataset generate_synthetic(std::uint64_t seed, const ClassMix& mix, int count, const SyntheticConfig& cfg) {
    if (count < 1) throw ConfigError("synthetic dataset needs count >= 1");
    if (cfg.min_length < 2 || cfg.max_length < cfg.min_length) throw ConfigError("invalid synthetic length range");
    Dataset data;
    data.reserve(count);
    for (int i = 0; i < count; ++i) data.push_back(generate_sample(seed, static_cast<std::uint64_t>(i), mix, cfg));
    return data;
}

}  // namespace ad1d
