#pragma once

#include <vector>

#include "posenorm/dataset.hpp"
#include "posenorm/reid_features.hpp"

namespace posenorm {

using FeatureVector = std::vector<double>;

struct EvalProtocol {
    bool cross_camera_filter = true;  // drop gallery items sharing identity AND camera
    bool multi_query = false;         // max-pool query features per (identity, camera)
};

struct EvalReport {
    std::vector<double> cmc;          // accuracy at ranks 1..R
    double map = 0.0;
    std::vector<double> per_query_ap;
    EvalProtocol protocol;
    int n_queries = 0;                // queries counted after exclusions
    int n_excluded = 0;               // queries with no valid match
    int n_gallery = 0;
};

// Coordinatewise maximum of one or more equally sized vectors.
FeatureVector fuse_max(const std::vector<FeatureVector>& vectors);

// |Q| x |G| Euclidean distances.
std::vector<std::vector<double>> pairwise_euclidean(const std::vector<FeatureVector>& q,
                                                    const std::vector<FeatureVector>& g);

// Mean over relevant positions k of (relevant in top-k)/k. Requires at least
// one relevant entry.
double average_precision(const std::vector<int>& ranked_relevance);

// Rank gallery per query (ascending distance, ties by gallery index), apply
// the protocol filter, and aggregate CMC and mAP. Queries left without any
// valid match are excluded and tallied. max_rank 0 means the full gallery.
EvalReport cmc_map(const std::vector<std::vector<double>>& distmat,
                   const std::vector<int>& query_labels, const std::vector<int>& query_cams,
                   const std::vector<int>& gallery_labels, const std::vector<int>& gallery_cams,
                   const EvalProtocol& protocol, int max_rank = 0);

struct EvalOptions {
    bool use_pose_branch = true;  // fuse backbone-B features of synthesized poses
    int n_poses = 8;              // canonical poses used (1 gives the single-pose ablation)
    int max_rank = 0;
};

// Full retrieval evaluation: fused features for the query and gallery splits
// of `ds`, distance ranking, CMC/mAP. Models are used frozen.
EvalReport evaluate_pipeline(const Dataset& ds, Backbone& backbone_a, Backbone* backbone_b,
                             Generator* gen, const CanonicalPoseSet* canon,
                             const EvalProtocol& protocol, const EvalOptions& options = {});

// The fused representation of one image under the options (exposed for the
// pipeline and tests).
FeatureVector fused_feature(const PersonImage& img, Backbone& backbone_a, Backbone* backbone_b,
                            Generator* gen, const CanonicalPoseSet* canon,
                            const EvalOptions& options);

}  // namespace posenorm
