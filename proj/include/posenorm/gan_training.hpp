#pragma once

#include <functional>
#include <vector>

#include "posenorm/canonical_poses.hpp"
#include "posenorm/dataset.hpp"
#include "posenorm/networks.hpp"

namespace posenorm {

enum class AdvMode { original, non_saturating };

struct GanLossConfig {
    double lambda1 = 10.0;
    AdvMode mode = AdvMode::non_saturating;
};

struct GanTrainConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    int batch_size = 32;
    int steps = 0;
    uint64_t seed = 0;
    bool include_self_pairs = true;
};

// Probabilities are clamped to this band before any logarithm.
constexpr double kProbEps = 1e-7;

double l1_loss(const Image& a, const Image& b);

struct AdvLosses {
    double l_gan = 0.0;        // log d_real + log(1 - d_fake)
    double gen_adv_term = 0.0; // generator's adversarial term under cfg.mode
    double l_d = 0.0;          // -l_gan
};

// Scalar closed forms; inputs must lie strictly inside (0,1).
AdvLosses adversarial_losses(double d_real, double d_fake, const GanLossConfig& cfg);

double generator_loss(double gen_adv_term, double l1, const GanLossConfig& cfg);

// One training batch: aligned {N,3,H,W} tensors.
struct GanBatch {
    Tensor src;
    Tensor tgt;
    Tensor pose;
};

struct TrainingPairIdx {
    int src = 0;
    int tgt = 0;
};

// Uniform over identities, then uniform over ordered image pairs within the
// identity. Identities without a valid pair are excluded from the draw; if
// none remain, construction fails with "no valid pairs".
class PairSampler {
public:
    PairSampler(const TrainView& view, bool include_self_pairs);

    TrainingPairIdx sample(Rng& rng) const;
    GanBatch make_batch(const std::vector<TrainingPairIdx>& pairs) const;
    GanBatch sample_batch(int batch_size, Rng& rng) const;

private:
    const TrainView* view_;
    bool include_self_;
    std::vector<int> eligible_;  // indices into view_->by_identity
};

struct StepMetrics {
    int64_t step = 0;
    double l_d = 0.0;
    double gen_adv = 0.0;
    double l1 = 0.0;
    double l_g = 0.0;
    double d_real_mean = 0.0;
    double d_fake_mean = 0.0;
};

// Generator objective of a batch at fixed parameters (no gradients).
double generator_objective(const GanBatch& batch, Generator& gen, Discriminator& disc,
                           const GanLossConfig& cfg);

// Fills generator parameter gradients for the batch objective; returns metrics
// of the evaluated terms.
StepMetrics generator_compute_grads(const GanBatch& batch, Generator& gen, Discriminator& disc,
                                    const GanLossConfig& cfg);

enum class DiscObjective { l_d, l_gan };

double discriminator_objective(const Tensor& real, const Tensor& fake, Discriminator& disc,
                               DiscObjective which);
void discriminator_compute_grads(const Tensor& real, const Tensor& fake, Discriminator& disc,
                                 DiscObjective which, double* loss = nullptr,
                                 double* d_real_mean = nullptr, double* d_fake_mean = nullptr);

// One alternating update: discriminator first, generator second.
StepMetrics train_step(const GanBatch& batch, Generator& gen, Discriminator& disc,
                       Adam& gen_opt, Adam& disc_opt, const GanLossConfig& cfg,
                       int64_t step_index = 0);

using StepCallback = std::function<void(int64_t step, const StepMetrics&)>;

std::vector<StepMetrics> train_pose_gan(const TrainView& view, Generator& gen,
                                        Discriminator& disc, const GanTrainConfig& train_cfg,
                                        const GanLossConfig& loss_cfg,
                                        const StepCallback& callback = nullptr);

// G applied to every canonical pose, in canonical order.
std::vector<PersonImage> synthesize_normalized(const PersonImage& img,
                                               const CanonicalPoseSet& canon, Generator& gen);

// Mean reconstruction L1 over all ordered same-identity pairs of the view.
double mean_pair_l1(const TrainView& view, Generator& gen, bool include_self_pairs = true);

}  // namespace posenorm
