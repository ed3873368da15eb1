#pragma once

#include <vector>

#include "posenorm/canonical_poses.hpp"
#include "posenorm/dataset.hpp"
#include "posenorm/gan_training.hpp"
#include "posenorm/layers.hpp"

namespace posenorm {

struct BackboneArch {
    int base_channels = 8;
    int feature_dim = 256;
    int h = 64;
    int w = 32;

    void validate() const;
};

// Which stages feed the merged feature. Stage outputs are average-pooled,
// passed through a square per-stage projection, concatenated, and projected
// to feature_dim by the final fully-connected layer.
struct FeatureTapSpec {
    std::vector<int> tap_stages = {1, 2, 3};
};

struct ReidTrainConfig {
    double learning_rate = 3.5e-4;
    double beta1 = 0.9;
    int batch_size = 16;
    double dropout = 0.5;
    int epochs = 0;
    uint64_t seed = 0;
};

constexpr int kBackboneStages = 4;

// Identity classifier: residual mini-backbone with four stride-2 stages,
// multi-stage tap merge, an FC feature projection, and a dropout + linear
// classification head. No normalization layers: average-pooled taps must keep
// first-order color statistics, which per-sample normalization would erase.
class Backbone {
public:
    Backbone(const BackboneArch& arch, const FeatureTapSpec& taps, int n_identities);

    void init(Rng& rng);

    // Dropout applies before the classifier head in training mode only.
    void set_dropout_rate(double p);

    Tensor features(const Tensor& x);                    // {N, feature_dim}
    Tensor logits(const Tensor& x, bool training, Rng* rng);
    // Backprop from d(loss)/d(logits); fills all parameter gradients.
    void backward_from_logits(const Tensor& glogits);

    std::vector<double> extract(const Image& img);       // evaluation mode
    std::vector<NamedParam> named_params();

    const BackboneArch& arch() const { return arch_; }
    const FeatureTapSpec& taps() const { return taps_; }
    int n_identities() const { return n_identities_; }
    int concat_dim() const { return concat_dim_; }
    int stage_channels(int stage) const;

private:
    BackboneArch arch_;
    FeatureTapSpec taps_;
    int n_identities_;
    int concat_dim_;

    Conv2d stem_;
    ReLU stem_r_;
    struct Stage {
        Conv2d conv;
        ReLU relu;
        ResidualBlock block;
        Stage(int in_c, int out_c)
            : conv(in_c, out_c, 3, 2, 1), block(out_c, /*with_norm=*/false, /*post_relu=*/true) {}
    };
    std::vector<Stage> stages_;
    std::vector<GlobalAvgPool> pools_;  // one per tapped stage
    std::vector<Linear> tap_proj_;
    Linear fc_;
    Dropout dropout_;
    Linear head_;
    std::vector<int> tap_of_stage_;     // stage -> tap slot or -1
};

// Softmax cross-entropy for one sample.
double identity_ce_loss(const std::vector<double>& logits, int label);

// Batch mean cross-entropy; optionally emits d(loss)/d(logits).
double ce_loss_batch(const Tensor& logits, const std::vector<int>& labels, Tensor* glogits);

struct ReidTrainResult {
    std::vector<double> accuracy_history;  // per-epoch training accuracy
    std::vector<double> loss_history;      // per-epoch mean batch loss
};

ReidTrainResult train_identity_classifier(Backbone& net, const std::vector<const Image*>& images,
                                          const std::vector<int>& labels,
                                          const ReidTrainConfig& cfg);

// The pose-normalized training set: every canonical-pose synthesis of every
// training image, labeled with the source image's identity.
struct NormalizedSet {
    std::vector<PersonImage> images;
    std::vector<int> labels;
};
NormalizedSet build_normalized_training_set(const TrainView& view, Generator& gen,
                                            const CanonicalPoseSet& canon);

ReidTrainResult train_backbone_b(Backbone& net, const TrainView& view, Generator& gen,
                                 const CanonicalPoseSet& canon, const ReidTrainConfig& cfg,
                                 bool include_originals = false);

}  // namespace posenorm
