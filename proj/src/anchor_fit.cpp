#include "ad1d/anchor_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "ad1d/error.hpp"

namespace ad1d {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

}  // namespace

std::vector<double> kde_modes(std::span<const double> values) {
    if (values.size() < 2) return {values.begin(), values.end()};
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / (n - 1));
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
    const double h = 0.9 * spread * std::pow(n, -0.2);

    constexpr int kGrid = 1024;
    const double lo = v.front() - 3 * h, hi = v.back() + 3 * h;
    std::vector<double> density(kGrid, 0.0);
    for (int g = 0; g < kGrid; ++g) {
        const double x = lo + (hi - lo) * g / (kGrid - 1);
        // Only points within 6 bandwidths contribute meaningfully.
        auto first = std::lower_bound(v.begin(), v.end(), x - 6 * h);
        auto last = std::upper_bound(v.begin(), v.end(), x + 6 * h);
        double d = 0.0;
        for (auto it = first; it != last; ++it) {
            const double z = (x - *it) / h;
            d += std::exp(-0.5 * z * z);
        }
        density[g] = d;
    }
    std::vector<std::pair<double, double>> modes;  // (density, location)
    for (int g = 0; g < kGrid; ++g) {
        const double left = g > 0 ? density[g - 1] : -1.0;
        const double right = g + 1 < kGrid ? density[g + 1] : -1.0;
        if (density[g] > left && density[g] >= right && density[g] > 0.0)
            modes.emplace_back(density[g], lo + (hi - lo) * g / (kGrid - 1));
    }
    std::stable_sort(modes.begin(), modes.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<double> out;
    for (auto& m : modes) out.push_back(m.second);
    return out;
}

std::vector<double> kmeans_1d(std::span<const double> values, int k, int iterations,
                              std::span<const double> seeds) {
    if (k < 1 || values.size() < static_cast<std::size_t>(k)) throw InputError("k-means needs at least k values");
    std::vector<double> pts(values.begin(), values.end());
    std::sort(pts.begin(), pts.end());

    std::vector<double> centers;
    const auto modes = seeds.empty() ? kde_modes(pts) : std::vector<double>(seeds.begin(), seeds.end());
    for (double m : modes) {
        if (static_cast<int>(centers.size()) == k) break;
        centers.push_back(m);
    }
    auto nearest_sq = [&](double x) {
        double best = std::numeric_limits<double>::infinity();
        for (double c : centers) best = std::min(best, (x - c) * (x - c));
        return best;
    };
    // Top up with the candidate that most reduces the squared error; the
    // candidates are 256 quantiles of the data.
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> cur(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) cur[i] = nearest_sq(pts[i]);
        double pick = pts.front(), gain_best = -1.0;
        for (int q = 0; q < 256; ++q) {
            const double cand = quantile(pts, (q + 0.5) / 256.0);
            double gain = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double d = (pts[i] - cand) * (pts[i] - cand);
                if (d < cur[i]) gain += cur[i] - d;
            }
            if (gain > gain_best) {
                gain_best = gain;
                pick = cand;
            }
        }
        centers.push_back(pick);
    }

    std::vector<int> assign(pts.size(), 0);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c)
                if (std::abs(pts[i] - centers[c]) < std::abs(pts[i] - centers[best])) best = c;
            assign[i] = best;
        }
        std::vector<double> sum(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sum[assign[i]] += pts[i];
            ++cnt[assign[i]];
        }
        bool changed = false;
        for (int c = 0; c < k; ++c) {
            double next;
            if (cnt[c] == 0) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const double d = std::abs(pts[i] - centers[assign[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next = pts[far];
                assign[far] = c;
            } else {
                next = sum[c] / static_cast<double>(cnt[c]);
            }
            if (next != centers[c]) changed = true;
            centers[c] = next;
        }
        if (!changed) break;
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

AnchorSet compute_anchors_from_widths(std::span<const double> widths, int input_size, int k) {
    if (k != AnchorSet::kCount) throw ConfigError("anchor computation supports exactly 9 clusters");
    std::set<double> distinct(widths.begin(), widths.end());
    if (distinct.size() < static_cast<std::size_t>(k)) {
        warn("only " + std::to_string(distinct.size()) + " distinct annotation widths; using reference anchors");
        return AnchorSet::reference();
    }
    // Widths span two orders of magnitude; a single Silverman bandwidth in
    // linear units would merge every narrow mode, so seeds come from the KDE
    // of log widths. Lloyd then refines in linear units.
    std::vector<double> logs;
    logs.reserve(widths.size());
    for (double w : widths) {
        if (!(w > 0.0)) throw InputError("annotation widths must be positive");
        logs.push_back(std::log(w));
    }
    auto seeds = kde_modes(logs);
    for (double& m : seeds) m = std::exp(m);
    const auto centers = kmeans_1d(widths, k, 100, seeds);
    AnchorSet anchors;
    for (int i = 0; i < k; ++i) anchors.widths[i] = std::clamp(centers[i], 1e-6, static_cast<double>(input_size));
    anchors.validate(input_size);
    return anchors;
}

AnchorSet compute_anchors(const Dataset& data, int input_size, int k) {
    std::vector<double> widths;
    for (const auto& s : data)
        for (const auto& a : s.annotations) widths.push_back(a.w * input_size);
    if (widths.size() < static_cast<std::size_t>(k)) {
        warn("dataset has fewer than " + std::to_string(k) + " annotations; using reference anchors");
        return AnchorSet::reference();
    }
    return compute_anchors_from_widths(widths, input_size, k);
}

}  // namespace ad1d
