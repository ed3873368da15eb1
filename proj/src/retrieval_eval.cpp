#include "posenorm/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace posenorm {

FeatureVector fuse_max(const std::vector<FeatureVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("fuse_max: empty vector list");
    FeatureVector out = vectors[0];
    for (size_t v = 1; v < vectors.size(); ++v) {
        if (vectors[v].size() != out.size())
            throw std::invalid_argument("fuse_max: dimension mismatch");
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], vectors[v][i]);
    }
    return out;
}

std::vector<std::vector<double>> pairwise_euclidean(const std::vector<FeatureVector>& q,
                                                    const std::vector<FeatureVector>& g) {
    std::vector<std::vector<double>> dist(q.size(), std::vector<double>(g.size(), 0.0));
    for (size_t i = 0; i < q.size(); ++i)
        for (size_t j = 0; j < g.size(); ++j) {
            if (q[i].size() != g[j].size())
                throw std::invalid_argument("pairwise_euclidean: dimension mismatch");
            double s = 0.0;
            for (size_t k = 0; k < q[i].size(); ++k) {
                const double d = q[i][k] - g[j][k];
                s += d * d;
            }
            dist[i][j] = std::sqrt(s);
        }
    return dist;
}

double average_precision(const std::vector<int>& ranked_relevance) {
    int relevant = 0;
    double sum = 0.0;
    for (size_t k = 0; k < ranked_relevance.size(); ++k) {
        if (ranked_relevance[k]) {
            ++relevant;
            sum += static_cast<double>(relevant) / static_cast<double>(k + 1);
        }
    }
    if (relevant == 0)
        throw std::invalid_argument("average_precision: no relevant item in the ranking");
    return sum / relevant;
}

EvalReport cmc_map(const std::vector<std::vector<double>>& distmat,
                   const std::vector<int>& query_labels, const std::vector<int>& query_cams,
                   const std::vector<int>& gallery_labels, const std::vector<int>& gallery_cams,
                   const EvalProtocol& protocol, int max_rank) {
    const int nq = static_cast<int>(distmat.size());
    if (nq == 0) throw std::invalid_argument("cmc_map: empty distance matrix");
    const int ng = static_cast<int>(distmat[0].size());
    if (static_cast<int>(query_labels.size()) != nq || static_cast<int>(query_cams.size()) != nq ||
        static_cast<int>(gallery_labels.size()) != ng || static_cast<int>(gallery_cams.size()) != ng)
        throw std::invalid_argument("cmc_map: label/camera arrays do not match the matrix");

    const int rank_count = max_rank > 0 ? std::min(max_rank, ng) : ng;
    EvalReport report;
    report.protocol = protocol;
    report.n_gallery = ng;
    std::vector<double> hits(static_cast<size_t>(rank_count), 0.0);
    double ap_sum = 0.0;

    for (int qi = 0; qi < nq; ++qi) {
        std::vector<int> valid;
        valid.reserve(static_cast<size_t>(ng));
        for (int gi = 0; gi < ng; ++gi) {
            if (protocol.cross_camera_filter &&
                gallery_labels[static_cast<size_t>(gi)] == query_labels[static_cast<size_t>(qi)] &&
                gallery_cams[static_cast<size_t>(gi)] == query_cams[static_cast<size_t>(qi)])
                continue;
            valid.push_back(gi);
        }
        bool any_relevant = false;
        for (int gi : valid)
            if (gallery_labels[static_cast<size_t>(gi)] == query_labels[static_cast<size_t>(qi)]) {
                any_relevant = true;
                break;
            }
        if (!any_relevant) {
            ++report.n_excluded;
            continue;
        }

        std::sort(valid.begin(), valid.end(), [&](int a, int b) {
            const double da = distmat[static_cast<size_t>(qi)][static_cast<size_t>(a)];
            const double db = distmat[static_cast<size_t>(qi)][static_cast<size_t>(b)];
            if (da != db) return da < db;
            return a < b;  // deterministic tie-break by gallery index
        });

        std::vector<int> relevance(valid.size(), 0);
        int first_hit = -1;
        for (size_t r = 0; r < valid.size(); ++r) {
            if (gallery_labels[static_cast<size_t>(valid[r])] ==
                query_labels[static_cast<size_t>(qi)]) {
                relevance[r] = 1;
                if (first_hit < 0) first_hit = static_cast<int>(r);
            }
        }
        if (first_hit >= 0 && first_hit < rank_count)
            for (int r = first_hit; r < rank_count; ++r) hits[static_cast<size_t>(r)] += 1.0;
        const double ap = average_precision(relevance);
        report.per_query_ap.push_back(ap);
        ap_sum += ap;
        ++report.n_queries;
    }

    if (report.n_queries == 0)
        throw std::invalid_argument("cmc_map: every query was excluded by the protocol filter");
    report.cmc.resize(static_cast<size_t>(rank_count));
    for (int r = 0; r < rank_count; ++r)
        report.cmc[static_cast<size_t>(r)] = hits[static_cast<size_t>(r)] / report.n_queries;
    report.map = ap_sum / report.n_queries;
    return report;
}

FeatureVector fused_feature(const PersonImage& img, Backbone& backbone_a, Backbone* backbone_b,
                            Generator* gen, const CanonicalPoseSet* canon,
                            const EvalOptions& options) {
    std::vector<FeatureVector> parts;
    parts.push_back(backbone_a.extract(img));
    if (options.use_pose_branch) {
        if (!backbone_b || !gen || !canon)
            throw std::invalid_argument("fused_feature: pose branch requires B, generator, poses");
        if (options.n_poses < 1 || options.n_poses > static_cast<int>(canon->poses.size()))
            throw std::invalid_argument("fused_feature: n_poses out of range");
        CanonicalPoseSet subset;
        subset.poses.assign(canon->poses.begin(), canon->poses.begin() + options.n_poses);
        const std::vector<PersonImage> synth = synthesize_normalized(img, subset, *gen);
        for (const auto& s : synth) parts.push_back(backbone_b->extract(s));
    }
    return fuse_max(parts);
}

EvalReport evaluate_pipeline(const Dataset& ds, Backbone& backbone_a, Backbone* backbone_b,
                             Generator* gen, const CanonicalPoseSet* canon,
                             const EvalProtocol& protocol, const EvalOptions& options) {
    const std::vector<int> query_idx = ds.indices_of(Split::query);
    const std::vector<int> gallery_idx = ds.indices_of(Split::gallery);
    if (query_idx.empty() || gallery_idx.empty())
        throw std::invalid_argument("evaluate_pipeline: dataset lacks query or gallery samples");

    auto featurize = [&](const std::vector<int>& idxs, std::vector<FeatureVector>& feats,
                         std::vector<int>& labels, std::vector<int>& cams) {
        for (int i : idxs) {
            const auto& s = ds.samples[static_cast<size_t>(i)];
            feats.push_back(fused_feature(s.image, backbone_a, backbone_b, gen, canon, options));
            labels.push_back(s.identity);
            cams.push_back(s.camera);
        }
    };

    std::vector<FeatureVector> qf, gf;
    std::vector<int> ql, qc, gl, gc;
    featurize(query_idx, qf, ql, qc);
    featurize(gallery_idx, gf, gl, gc);

    if (protocol.multi_query) {
        // Pool all query vectors of the same (identity, camera) by elementwise max.
        std::map<std::pair<int, int>, std::vector<FeatureVector>> groups;
        for (size_t i = 0; i < qf.size(); ++i)
            groups[{ql[i], qc[i]}].push_back(std::move(qf[i]));
        qf.clear();
        ql.clear();
        qc.clear();
        for (auto& [key, vecs] : groups) {
            qf.push_back(fuse_max(vecs));
            ql.push_back(key.first);
            qc.push_back(key.second);
        }
    }

    return cmc_map(pairwise_euclidean(qf, gf), ql, qc, gl, gc, protocol, options.max_rank);
}

}  // namespace posenorm
