#include "posenorm/canonical_poses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "posenorm/rng.hpp"

namespace posenorm {

std::vector<double> embed_pose(const PoseImage& pose, const EmbedderConfig& cfg) {
    const Image small = resize_bilinear(pose, cfg.out_h, cfg.out_w);
    std::vector<double> v(static_cast<size_t>(cfg.out_h) * cfg.out_w);
    size_t i = 0;
    for (int y = 0; y < cfg.out_h; ++y)
        for (int x = 0; x < cfg.out_w; ++x) {
            const double gray = (small.at(0, y, x) + small.at(1, y, x) + small.at(2, y, x)) / 3.0;
            v[i++] = (gray + 1.0) * 0.5;  // background (-1) maps to 0
        }
    if (cfg.normalize) {
        double norm2 = 0.0;
        for (double e : v) norm2 += e * e;
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (double& e : v) e *= inv;
        }
    }
    return v;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace {

// k-means++ seeding: first center uniform, then D^2-weighted draws.
std::vector<std::vector<double>> kmeanspp_init(const std::vector<std::vector<double>>& pts,
                                               int k, Rng& rng) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<double>> centers;
    centers.push_back(pts[static_cast<size_t>(rng.uniform_int(n))]);
    std::vector<double> d2(static_cast<size_t>(n));
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, squared_distance(pts[static_cast<size_t>(i)], c));
            d2[static_cast<size_t>(i)] = best;
            total += best;
        }
        int pick = -1;
        if (total <= 0.0) {
            // all remaining mass sits at existing centers; take the first non-center point
            for (int i = 0; i < n && pick < 0; ++i)
                if (d2[static_cast<size_t>(i)] > 0.0) pick = i;
            if (pick < 0) pick = rng.uniform_int(n);
        } else {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[static_cast<size_t>(i)];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;
        }
        centers.push_back(pts[static_cast<size_t>(pick)]);
    }
    return centers;
}

int nearest_center(const std::vector<double>& p, const std::vector<std::vector<double>>& centers) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
        const double d = squared_distance(p, centers[static_cast<size_t>(c)]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

PoseClusterModel kmeans_fit(const std::vector<std::vector<double>>& points, int k,
                            uint64_t seed, int max_iter) {
    const int n = static_cast<int>(points.size());
    if (n == 0) throw std::invalid_argument("kmeans_fit: empty input");
    if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
    if (n < k) throw std::invalid_argument("kmeans_fit: fewer points than clusters");
    const size_t d = points[0].size();
    for (const auto& p : points)
        if (p.size() != d) throw std::invalid_argument("kmeans_fit: inconsistent dimensions");

    {
        std::set<std::vector<double>> distinct(points.begin(), points.end());
        if (static_cast<int>(distinct.size()) < k)
            throw std::invalid_argument("kmeans_fit: insufficient distinct points");
    }

    Rng rng(seed);
    PoseClusterModel model;
    model.k = k;
    model.centroids = kmeanspp_init(points, k, rng);
    model.assignments.assign(static_cast<size_t>(n), -1);

    for (int iter = 0; iter < max_iter; ++iter) {
        // Assignment step.
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            const int c = nearest_center(points[static_cast<size_t>(i)], model.centroids);
            inertia += squared_distance(points[static_cast<size_t>(i)],
                                        model.centroids[static_cast<size_t>(c)]);
            if (model.assignments[static_cast<size_t>(i)] != c) {
                model.assignments[static_cast<size_t>(i)] = c;
                changed = true;
            }
        }
        model.inertia_history.push_back(inertia);
        model.inertia = inertia;
        if (!changed) break;

        // Update step.
        std::vector<std::vector<double>> sums(static_cast<size_t>(k), std::vector<double>(d, 0.0));
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const int c = model.assignments[static_cast<size_t>(i)];
            counts[static_cast<size_t>(c)]++;
            for (size_t j = 0; j < d; ++j) sums[static_cast<size_t>(c)][j] += points[static_cast<size_t>(i)][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) {
                // Reseed an empty cluster to the point farthest from its centroid.
                int far_i = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const int a = model.assignments[static_cast<size_t>(i)];
                    const double dist = squared_distance(points[static_cast<size_t>(i)],
                                                         model.centroids[static_cast<size_t>(a)]);
                    if (dist > far_d) {
                        far_d = dist;
                        far_i = i;
                    }
                }
                model.centroids[static_cast<size_t>(c)] = points[static_cast<size_t>(far_i)];
            } else {
                for (size_t j = 0; j < d; ++j)
                    model.centroids[static_cast<size_t>(c)][j] =
                        sums[static_cast<size_t>(c)][j] / counts[static_cast<size_t>(c)];
            }
        }
    }

    // Final assignment pass so centroids/assignments are mutually consistent
    // even when stopping on max_iter.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        const int c = nearest_center(points[static_cast<size_t>(i)], model.centroids);
        model.assignments[static_cast<size_t>(i)] = c;
        inertia += squared_distance(points[static_cast<size_t>(i)], model.centroids[static_cast<size_t>(c)]);
    }
    model.inertia = inertia;

    // Recompute centroids as exact means of the final assignment.
    {
        std::vector<std::vector<double>> sums(static_cast<size_t>(k), std::vector<double>(d, 0.0));
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const int c = model.assignments[static_cast<size_t>(i)];
            counts[static_cast<size_t>(c)]++;
            for (size_t j = 0; j < d; ++j) sums[static_cast<size_t>(c)][j] += points[static_cast<size_t>(i)][j];
        }
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<size_t>(c)] > 0)
                for (size_t j = 0; j < d; ++j)
                    model.centroids[static_cast<size_t>(c)][j] =
                        sums[static_cast<size_t>(c)][j] / counts[static_cast<size_t>(c)];
        model.cluster_sizes.assign(counts.begin(), counts.end());
    }

    // Medoids: assigned member nearest to the centroid, ties by lowest index.
    model.medoid_indices.assign(static_cast<size_t>(k), -1);
    std::vector<double> best(static_cast<size_t>(k), std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) {
        const int c = model.assignments[static_cast<size_t>(i)];
        const double dist = squared_distance(points[static_cast<size_t>(i)], model.centroids[static_cast<size_t>(c)]);
        if (dist < best[static_cast<size_t>(c)]) {
            best[static_cast<size_t>(c)] = dist;
            model.medoid_indices[static_cast<size_t>(c)] = i;
        }
    }
    return model;
}

CanonicalPoseSet select_canonical_poses(const std::vector<PoseImage>& poses,
                                        const std::vector<std::string>& sample_ids, int k,
                                        uint64_t seed, const EmbedderConfig& cfg, int max_iter) {
    if (poses.empty()) throw std::invalid_argument("select_canonical_poses: empty dataset");
    if (sample_ids.size() != poses.size())
        throw std::invalid_argument("select_canonical_poses: ids/poses size mismatch");
    std::vector<std::vector<double>> emb;
    emb.reserve(poses.size());
    for (const auto& p : poses) emb.push_back(embed_pose(p, cfg));

    CanonicalPoseSet out;
    out.model = kmeans_fit(emb, k, seed, max_iter);
    for (int c = 0; c < k; ++c) {
        const int m = out.model.medoid_indices[static_cast<size_t>(c)];
        out.poses.push_back(poses[static_cast<size_t>(m)]);
        out.source_sample_ids.push_back(sample_ids[static_cast<size_t>(m)]);
    }
    return out;
}

std::vector<std::array<double, 2>> principal_axes_projection(
    const std::vector<std::vector<double>>& points) {
    const int n = static_cast<int>(points.size());
    if (n == 0) return {};
    const size_t d = points[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& p : points)
        for (size_t j = 0; j < d; ++j) mean[j] += p[j];
    for (double& m : mean) m /= n;

    auto centered = [&](int i, size_t j) { return points[static_cast<size_t>(i)][j] - mean[j]; };
    auto cov_mult = [&](const std::vector<double>& v) {
        // (X^T X / n) v without forming the covariance matrix
        std::vector<double> out(d, 0.0);
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < d; ++j) dot += centered(i, j) * v[j];
            for (size_t j = 0; j < d; ++j) out[j] += dot * centered(i, j);
        }
        for (double& o : out) o /= n;
        return out;
    };

    auto orthonormalize = [](std::vector<double> w,
                             const std::vector<std::vector<double>>& axes) {
        for (const auto& prev : axes) {
            double dot = 0.0;
            for (size_t j = 0; j < w.size(); ++j) dot += w[j] * prev[j];
            for (size_t j = 0; j < w.size(); ++j) w[j] -= dot * prev[j];
        }
        double norm = 0.0;
        for (double e : w) norm += e * e;
        norm = std::sqrt(norm);
        if (norm >= 1e-14)
            for (double& e : w) e /= norm;
        else
            w.clear();  // signals a vanished direction
        return w;
    };

    std::vector<std::vector<double>> axes;
    for (int axis = 0; axis < 2; ++axis) {
        // Start from the first basis vector with a surviving orthogonal part,
        // so every axis stays orthonormal to the ones before it.
        std::vector<double> v;
        for (size_t basis = 0; basis < d && v.empty(); ++basis) {
            std::vector<double> e(d, 0.0);
            e[(static_cast<size_t>(axis) + basis) % d] = 1.0;
            v = orthonormalize(std::move(e), axes);
        }
        if (v.empty()) v.assign(d, 0.0);  // d < 2: no second direction exists
        for (int it = 0; it < 200 && !v.empty(); ++it) {
            std::vector<double> w = orthonormalize(cov_mult(v), axes);
            if (w.empty()) break;  // no variance left along any new direction
            v = std::move(w);
        }
        axes.push_back(v);
    }

    std::vector<std::array<double, 2>> proj(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 2; ++a) {
            double dot = 0.0;
            for (size_t j = 0; j < d; ++j) dot += centered(i, j) * axes[static_cast<size_t>(a)][j];
            proj[static_cast<size_t>(i)][static_cast<size_t>(a)] = dot;
        }
    return proj;
}

}  // namespace posenorm
