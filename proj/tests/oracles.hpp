// Independent reference implementations used as test oracles. Everything here
// is written from the definitions, separately from the library code paths it
// checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace oracle {

// Point-to-segment distance via the explicit clamped projection.
inline double segment_distance(double px, double py, double ax, double ay, double bx,
                               double by) {
    const double abx = bx - ax, aby = by - ay;
    const double denom = abx * abx + aby * aby;
    double t = 0.0;
    if (denom > 0.0) t = ((px - ax) * abx + (py - ay) * aby) / denom;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = ax + t * abx - px, cy = ay + t * aby - py;
    return std::sqrt(cx * cx + cy * cy);
}

// Full-grid scan rasterization of one stroke: every pixel whose center lies
// within thickness/2 of the segment.
inline std::set<std::pair<int, int>> scan_rasterize(int h, int w, double ax, double ay,
                                                    double bx, double by, double thickness) {
    std::set<std::pair<int, int>> pixels;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (segment_distance(x, y, ax, ay, bx, by) <= thickness * 0.5)
                pixels.insert({y, x});
    return pixels;
}

// Exhaustive minimum-inertia bipartition of 1-D points.
struct Bipartition {
    std::vector<int> assignment;
    double inertia = 0.0;
    double centroid0 = 0.0, centroid1 = 0.0;
};

inline Bipartition best_bipartition_1d(const std::vector<double>& xs) {
    const int n = static_cast<int>(xs.size());
    Bipartition best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        double s0 = 0, s1 = 0;
        int c0 = 0, c1 = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                s1 += xs[static_cast<size_t>(i)];
                ++c1;
            } else {
                s0 += xs[static_cast<size_t>(i)];
                ++c0;
            }
        const double m0 = s0 / c0, m1 = s1 / c1;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            const double m = (mask & (1u << i)) ? m1 : m0;
            const double d = xs[static_cast<size_t>(i)] - m;
            inertia += d * d;
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroid0 = m0;
            best.centroid1 = m1;
            best.assignment.assign(static_cast<size_t>(n), 0);
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) best.assignment[static_cast<size_t>(i)] = 1;
        }
    }
    return best;
}

// Average precision straight from the definition.
inline double average_precision(const std::vector<int>& relevance) {
    double sum = 0.0;
    int hits = 0;
    for (size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k]) {
            ++hits;
            double in_top = 0;
            for (size_t j = 0; j <= k; ++j) in_top += relevance[j];
            sum += in_top / static_cast<double>(k + 1);
        }
    }
    return hits ? sum / hits : 0.0;
}

// Brute-force CMC/mAP re-implementation: re-sorts and counts from scratch.
struct BruteEval {
    std::vector<double> cmc;
    double map = 0.0;
    int n_queries = 0;
    int n_excluded = 0;
};

inline BruteEval brute_cmc_map(const std::vector<std::vector<double>>& dist,
                               const std::vector<int>& ql, const std::vector<int>& qc,
                               const std::vector<int>& gl, const std::vector<int>& gc,
                               bool cross_camera_filter, int max_rank) {
    const int nq = static_cast<int>(dist.size());
    const int ng = static_cast<int>(gl.size());
    const int ranks = max_rank > 0 ? std::min(max_rank, ng) : ng;
    BruteEval out;
    out.cmc.assign(static_cast<size_t>(ranks), 0.0);
    double ap_total = 0.0;
    for (int q = 0; q < nq; ++q) {
        std::vector<std::pair<double, int>> order;
        for (int g = 0; g < ng; ++g) {
            if (cross_camera_filter && gl[static_cast<size_t>(g)] == ql[static_cast<size_t>(q)] &&
                gc[static_cast<size_t>(g)] == qc[static_cast<size_t>(q)])
                continue;
            order.push_back({dist[static_cast<size_t>(q)][static_cast<size_t>(g)], g});
        }
        std::sort(order.begin(), order.end());
        std::vector<int> rel;
        for (const auto& [d, g] : order)
            rel.push_back(gl[static_cast<size_t>(g)] == ql[static_cast<size_t>(q)] ? 1 : 0);
        if (std::count(rel.begin(), rel.end(), 1) == 0) {
            ++out.n_excluded;
            continue;
        }
        ++out.n_queries;
        size_t first_hit = 0;
        while (!rel[first_hit]) ++first_hit;
        for (size_t k = first_hit; k < static_cast<size_t>(ranks); ++k) out.cmc[k] += 1.0;
        ap_total += average_precision(rel);
    }
    for (auto& c : out.cmc) c /= out.n_queries;
    out.map = ap_total / out.n_queries;
    return out;
}

// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const int n = static_cast<int>(a.size());
    std::map<std::pair<int, int>, int> joint;
    std::map<int, int> ca, cb;
    for (int i = 0; i < n; ++i) {
        joint[{a[static_cast<size_t>(i)], b[static_cast<size_t>(i)]}]++;
        ca[a[static_cast<size_t>(i)]]++;
        cb[b[static_cast<size_t>(i)]]++;
    }
    auto comb2 = [](int64_t m) { return static_cast<double>(m) * (m - 1) / 2.0; };
    double sum_joint = 0, sum_a = 0, sum_b = 0;
    for (const auto& [k, v] : joint) sum_joint += comb2(v);
    for (const auto& [k, v] : ca) sum_a += comb2(v);
    for (const auto& [k, v] : cb) sum_b += comb2(v);
    const double total = comb2(n);
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

// Central finite differences of a scalar function with respect to a parameter
// vector, compared against an analytic gradient; returns the relative error
// of the worst tensor under the norms.
inline double central_diff_relative_error(std::vector<double>& param,
                                          const std::vector<double>& analytic,
                                          const std::function<double()>& eval, double h = 1e-4) {
    double num2 = 0.0, den2 = 0.0;
    for (size_t i = 0; i < param.size(); ++i) {
        const double orig = param[i];
        param[i] = orig + h;
        const double up = eval();
        param[i] = orig - h;
        const double down = eval();
        param[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        num2 += (fd - analytic[i]) * (fd - analytic[i]);
        den2 += std::max(fd * fd, analytic[i] * analytic[i]);
    }
    // Tensors whose true gradient is zero compare as noise against noise; a
    // small floor keeps them from reading as a 100% relative error.
    const double floor = 1e-8;
    return std::sqrt(num2) / std::max(std::sqrt(den2), floor);
}

}  // namespace oracle
