#include "ad1d/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ad1d/error.hpp"

namespace ad1d {

AugmentConfig AugmentConfig::disabled() {
    AugmentConfig c;
    c.p_scale_shift = c.p_flip = c.p_floor_shift = c.p_noise = c.p_smooth = c.p_cut_paste = 0.0;
    return c;
}

void AugmentConfig::validate() const {
    for (double p : {p_scale_shift, p_flip, p_floor_shift, p_noise, p_smooth, p_cut_paste})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("invalid scale range");
    if (!(level_min <= level_max)) throw ConfigError("invalid level range");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("invalid noise amplitude");
    for (int w : smooth_windows)
        if (w < smooth_order + 1 || w % 2 == 0) throw ConfigError("smoothing windows must be odd and > order");
}

void augment_scale_shift(Sample& s, double r_scale) {
    if (s.values.empty()) return;
    const double mean =
        std::accumulate(s.values.begin(), s.values.end(), 0.0) / static_cast<double>(s.values.size());
    for (auto& v : s.values) v = static_cast<float>((v - mean) * r_scale + v);
}

void augment_flip(Sample& s) {
    std::reverse(s.values.begin(), s.values.end());
    for (auto& a : s.annotations) a.x = 1.0 - a.x;
}

void augment_floor_shift(Sample& s, double r_level) {
    for (auto& v : s.values) v = static_cast<float>(v + r_level);
}

void augment_noise(Sample& s, std::mt19937_64& rng, double amplitude) {
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (auto& v : s.values) v = static_cast<float>(v + dist(rng));
}

std::vector<double> savgol_coefficients(int window, int order, int position) {
    if (window < 1 || window % 2 == 0 || order < 0 || order >= window)
        throw ConfigError("savgol: window must be odd and greater than the polynomial order");
    const int half = window / 2;
    if (position < -half || position > half) throw ConfigError("savgol: position outside window");
    const int m = order + 1;
    // Normal equations (A^T A) y = e(position), with A[i][k] = (i - half)^k.
    std::vector<double> ata(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = -half; i <= half; ++i)
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) ata[r * m + c] += std::pow(i, r) * std::pow(i, c);
    std::vector<double> y(m);
    for (int k = 0; k < m; ++k) y[k] = std::pow(position, k);
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(ata[r * m + col]) > std::abs(ata[piv * m + col])) piv = r;
        if (piv != col) {
            for (int c = 0; c < m; ++c) std::swap(ata[col * m + c], ata[piv * m + c]);
            std::swap(y[col], y[piv]);
        }
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            const double f = ata[r * m + col] / ata[col * m + col];
            for (int c = 0; c < m; ++c) ata[r * m + c] -= f * ata[col * m + c];
            y[r] -= f * y[col];
        }
    }
    for (int k = 0; k < m; ++k) y[k] /= ata[k * m + k];
    std::vector<double> coeffs(window);
    for (int i = -half; i <= half; ++i) {
        double c = 0.0;
        for (int k = 0; k < m; ++k) c += y[k] * std::pow(i, k);
        coeffs[i + half] = c;
    }
    return coeffs;
}

bool augment_smooth(Sample& s, int window, int order) {
    const int n = static_cast<int>(s.values.size());
    if (n < window) {
        warn("smoothing skipped: sample of length " + std::to_string(n) + " shorter than window " +
             std::to_string(window));
        return false;
    }
    const int half = window / 2;
    std::vector<std::vector<double>> kernels;
    kernels.reserve(window);
    for (int p = -half; p <= half; ++p) kernels.push_back(savgol_coefficients(window, order, p));
    const auto& center = kernels[half];
    std::vector<float> out(n);
    auto apply = [&](const std::vector<double>& k, int first) {
        double acc = 0.0;
        for (int j = 0; j < window; ++j) acc += k[j] * s.values[first + j];
        return static_cast<float>(acc);
    };
    for (int i = 0; i < n; ++i) {
        if (i < half)
            out[i] = apply(kernels[i], 0);
        else if (i >= n - half)
            out[i] = apply(kernels[i - (n - window)], n - window);
        else
            out[i] = apply(center, i - half);
    }
    s.values = std::move(out);
    return true;
}

namespace {

constexpr int kRollOffClass = 2;
constexpr int kContext = 4;

bool overlaps(double a0, double a1, double b0, double b1) { return std::max(a0, b0) < std::min(a1, b1); }

// Mean of up to kContext values left of `a` and right of `b`.
std::pair<double, double> edge_levels(const std::vector<float>& v, int a, int b) {
    const int n = static_cast<int>(v.size());
    double ls = 0.0, rs = 0.0;
    int lc = 0, rc = 0;
    for (int i = std::max(0, a - kContext); i < a; ++i, ++lc) ls += v[i];
    for (int i = b; i < std::min(n, b + kContext); ++i, ++rc) rs += v[i];
    if (lc == 0 && rc == 0) return {0.0, 0.0};
    const double l = lc ? ls / lc : rs / rc;
    const double r = rc ? rs / rc : l;
    return {l, r};
}

double context_sigma(const std::vector<float>& v, int a, int b) {
    const int n = static_cast<int>(v.size());
    std::vector<double> ctx;
    for (int i = std::max(0, a - kContext); i < a; ++i) ctx.push_back(v[i]);
    for (int i = b; i < std::min(n, b + kContext); ++i) ctx.push_back(v[i]);
    if (ctx.size() < 2) return 0.0;
    const double mean = std::accumulate(ctx.begin(), ctx.end(), 0.0) / ctx.size();
    double sq = 0.0;
    for (double c : ctx) sq += (c - mean) * (c - mean);
    return std::sqrt(sq / (ctx.size() - 1));
}

double lerp_at(std::pair<double, double> ends, int i, int m) {
    if (m <= 1) return 0.5 * (ends.first + ends.second);
    const double t = (i + 0.5) / m;
    return ends.first + (ends.second - ends.first) * t;
}

}  // namespace

bool augment_cut_paste(Sample& s, std::mt19937_64& rng) {
    const int n = static_cast<int>(s.values.size());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < s.annotations.size(); ++i)
        if (s.annotations[i].cls != kRollOffClass && s.annotations[i].w < 0.5) candidates.push_back(i);
    if (candidates.empty() || n < 2) return false;

    const std::size_t pick = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    Annotation& target = s.annotations[pick];
    const int a = std::clamp(static_cast<int>(std::floor(target.start() * n)), 0, n - 1);
    const int b = std::clamp(static_cast<int>(std::ceil(target.end() * n)), a + 1, n);
    const int m = b - a;
    if (m >= n) return false;

    double new_x = 0.0;
    int dest = -1;
    std::uniform_int_distribution<int> pos(0, n - m);
    for (int attempt = 0; attempt < 100 && dest < 0; ++attempt) {
        const int cand = pos(rng);
        if (cand == a) continue;
        const double x = target.x + static_cast<double>(cand - a) / n;
        const double lo = x - target.w / 2, hi = x + target.w / 2;
        if (lo < 0.0 || hi > 1.0) continue;
        bool clear = true;
        for (std::size_t j = 0; j < s.annotations.size() && clear; ++j)
            if (j != pick && overlaps(lo, hi, s.annotations[j].start(), s.annotations[j].end())) clear = false;
        if (clear) {
            dest = cand;
            new_x = x;
        }
    }
    if (dest < 0) return false;

    auto& v = s.values;
    const auto src_edges = edge_levels(v, a, b);
    std::vector<double> deviation(m);
    for (int i = 0; i < m; ++i) deviation[i] = v[a + i] - lerp_at(src_edges, i, m);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sigma = context_sigma(v, a, b);
    for (int i = 0; i < m; ++i) v[a + i] = static_cast<float>(lerp_at(src_edges, i, m) + sigma * noise(rng));

    const auto dst_edges = edge_levels(v, dest, dest + m);
    for (int i = 0; i < m; ++i) v[dest + i] = static_cast<float>(lerp_at(dst_edges, i, m) + deviation[i]);
    target.x = new_x;
    return true;
}

void augment(Sample& s, const AugmentConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto chosen = [&](double p) { return p > 0.0 && u01(rng) < p; };
    if (chosen(cfg.p_cut_paste)) augment_cut_paste(s, rng);
    if (chosen(cfg.p_flip)) augment_flip(s);
    if (chosen(cfg.p_smooth)) {
        const int w = cfg.smooth_windows[std::uniform_int_distribution<int>(0, 2)(rng)];
        augment_smooth(s, w, cfg.smooth_order);
    }
    if (chosen(cfg.p_scale_shift))
        augment_scale_shift(s, std::uniform_real_distribution<double>(cfg.scale_min, cfg.scale_max)(rng));
    if (chosen(cfg.p_floor_shift))
        augment_floor_shift(s, std::uniform_real_distribution<double>(cfg.level_min, cfg.level_max)(rng));
    if (chosen(cfg.p_noise)) augment_noise(s, rng, cfg.noise_amplitude);
}

}  // namespace ad1d
