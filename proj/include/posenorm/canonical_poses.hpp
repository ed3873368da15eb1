#pragma once

#include <string>
#include <vector>

#include "posenorm/image.hpp"

namespace posenorm {

// Pluggable pose-image embedder. The default maps a pose image to a compact
// grayscale thumbnail: bilinear downsample, average the channels, shift the
// background to zero, flatten, then L2-normalize (zero vectors stay zero).
struct EmbedderConfig {
    int out_h = 16;
    int out_w = 8;
    bool normalize = true;
};

std::vector<double> embed_pose(const PoseImage& pose, const EmbedderConfig& cfg = {});

struct PoseClusterModel {
    int k = 0;
    std::vector<std::vector<double>> centroids;  // k x d
    std::vector<int> assignments;                // per sample
    double inertia = 0.0;                        // sum of squared distances
    std::vector<int> medoid_indices;             // per cluster: nearest member
    std::vector<double> inertia_history;         // one entry per Lloyd iteration
    std::vector<int> cluster_sizes;
};

// Seeded k-means++ initialization followed by Lloyd iterations. Stops when
// assignments are stable or after max_iter. Empty clusters are reseeded to
// the point farthest from its current centroid.
PoseClusterModel kmeans_fit(const std::vector<std::vector<double>>& points, int k,
                            uint64_t seed, int max_iter = 100);

struct CanonicalPoseSet {
    std::vector<PoseImage> poses;               // one representative per cluster
    std::vector<std::string> source_sample_ids;
    PoseClusterModel model;
};

// Embed every pose, cluster with k-means, and pick each cluster's medoid
// member (nearest to the centroid, ties by lowest sample index) as the
// canonical pose.
CanonicalPoseSet select_canonical_poses(const std::vector<PoseImage>& poses,
                                        const std::vector<std::string>& sample_ids, int k,
                                        uint64_t seed, const EmbedderConfig& cfg = {},
                                        int max_iter = 100);

// Project embeddings onto their top-2 principal axes (deterministic power
// iteration); used for the 2-D cluster scatter export.
std::vector<std::array<double, 2>> principal_axes_projection(
    const std::vector<std::vector<double>>& points);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace posenorm
