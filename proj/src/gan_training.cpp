#include "posenorm/gan_training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace posenorm {

double l1_loss(const Image& a, const Image& b) {
    if (!a.same_dims(b))
        throw std::invalid_argument("l1_loss: shape mismatch (" + std::to_string(a.h) + "x" +
                                    std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                    std::to_string(b.w) + ")");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

AdvLosses adversarial_losses(double d_real, double d_fake, const GanLossConfig& cfg) {
    if (!(d_real > 0.0 && d_real < 1.0) || !(d_fake > 0.0 && d_fake < 1.0))
        throw std::domain_error("adversarial_losses: probabilities must lie in (0,1)");
    AdvLosses out;
    out.l_gan = std::log(d_real) + std::log(1.0 - d_fake);
    out.gen_adv_term =
        cfg.mode == AdvMode::original ? std::log(1.0 - d_fake) : -std::log(d_fake);
    out.l_d = -out.l_gan;
    return out;
}

double generator_loss(double gen_adv_term, double l1, const GanLossConfig& cfg) {
    if (!std::isfinite(gen_adv_term) || !std::isfinite(l1))
        throw std::domain_error("generator_loss: non-finite input");
    return gen_adv_term + cfg.lambda1 * l1;
}

// ------------------------------------------------------------ PairSampler

PairSampler::PairSampler(const TrainView& view, bool include_self_pairs)
    : view_(&view), include_self_(include_self_pairs) {
    for (int g = 0; g < static_cast<int>(view.by_identity.size()); ++g) {
        const size_t n = view.by_identity[static_cast<size_t>(g)].size();
        if (n >= 2 || (include_self_ && n >= 1)) eligible_.push_back(g);
    }
    if (eligible_.empty()) throw std::invalid_argument("PairSampler: no valid pairs");
}

TrainingPairIdx PairSampler::sample(Rng& rng) const {
    const int g = eligible_[static_cast<size_t>(rng.uniform_int(static_cast<int>(eligible_.size())))];
    const auto& members = view_->by_identity[static_cast<size_t>(g)];
    const int n = static_cast<int>(members.size());
    TrainingPairIdx pair;
    if (include_self_) {
        pair.src = members[static_cast<size_t>(rng.uniform_int(n))];
        pair.tgt = members[static_cast<size_t>(rng.uniform_int(n))];
    } else {
        const int i = rng.uniform_int(n);
        int j = rng.uniform_int(n - 1);
        if (j >= i) ++j;
        pair.src = members[static_cast<size_t>(i)];
        pair.tgt = members[static_cast<size_t>(j)];
    }
    return pair;
}

GanBatch PairSampler::make_batch(const std::vector<TrainingPairIdx>& pairs) const {
    std::vector<const Image*> src, tgt, pose;
    src.reserve(pairs.size());
    for (const auto& p : pairs) {
        const auto& samples = view_->dataset->samples;
        src.push_back(&samples[static_cast<size_t>(p.src)].image);
        tgt.push_back(&samples[static_cast<size_t>(p.tgt)].image);
        pose.push_back(&samples[static_cast<size_t>(p.tgt)].pose);
    }
    return GanBatch{images_to_tensor(src), images_to_tensor(tgt), images_to_tensor(pose)};
}

GanBatch PairSampler::sample_batch(int batch_size, Rng& rng) const {
    std::vector<TrainingPairIdx> pairs(static_cast<size_t>(batch_size));
    for (auto& p : pairs) p = sample(rng);
    return make_batch(pairs);
}

// -------------------------------------------------------------- training

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// d(log clamp(p))/dp: zero where the clamp is active.
double dlog_clamped(double p) { return (p > kProbEps && p < 1.0 - kProbEps) ? 1.0 / p : 0.0; }

Tensor concat_batch(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 4 || b.shape.size() != 4 || a.dim(1) != b.dim(1) ||
        a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_batch: shape mismatch");
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
    return out;
}

}  // namespace

double generator_objective(const GanBatch& batch, Generator& gen, Discriminator& disc,
                           const GanLossConfig& cfg) {
    const Tensor fake = gen.forward(concat_channels(batch.src, batch.pose));
    const std::vector<double> probs = disc.forward_probs(fake);
    const int n = static_cast<int>(probs.size());
    double adv = 0.0;
    for (double p : probs) {
        const double pc = clamp_prob(p);
        adv += cfg.mode == AdvMode::original ? std::log(1.0 - pc) : -std::log(pc);
    }
    adv /= n;
    double l1 = 0.0;
    for (size_t i = 0; i < fake.data.size(); ++i) l1 += std::abs(batch.tgt.data[i] - fake.data[i]);
    l1 /= static_cast<double>(fake.data.size());
    return adv + cfg.lambda1 * l1;
}

StepMetrics generator_compute_grads(const GanBatch& batch, Generator& gen, Discriminator& disc,
                                    const GanLossConfig& cfg) {
    const Tensor fake = gen.forward(concat_channels(batch.src, batch.pose));
    const std::vector<double> probs = disc.forward_probs(fake);
    const int n = static_cast<int>(probs.size());

    StepMetrics m;
    std::vector<double> dprob(probs.size(), 0.0);
    for (size_t i = 0; i < probs.size(); ++i) {
        const double pc = clamp_prob(probs[i]);
        if (cfg.mode == AdvMode::original) {
            m.gen_adv += std::log(1.0 - pc);
            dprob[i] = -dlog_clamped(1.0 - probs[i]) / n;
        } else {
            m.gen_adv += -std::log(pc);
            dprob[i] = -dlog_clamped(probs[i]) / n;
        }
        m.d_fake_mean += probs[i];
    }
    m.gen_adv /= n;
    m.d_fake_mean /= n;

    Tensor gfake = disc.backward_from_probs(dprob);

    double l1 = 0.0;
    const double inv = 1.0 / static_cast<double>(fake.data.size());
    for (size_t i = 0; i < fake.data.size(); ++i) {
        const double diff = fake.data[i] - batch.tgt.data[i];
        l1 += std::abs(diff);
        gfake.data[i] += cfg.lambda1 * inv * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
    }
    m.l1 = l1 * inv;
    m.l_g = m.gen_adv + cfg.lambda1 * m.l1;

    gen.backward(gfake);
    return m;
}

double discriminator_objective(const Tensor& real, const Tensor& fake, Discriminator& disc,
                               DiscObjective which) {
    const int n = real.dim(0);
    const std::vector<double> probs = disc.forward_probs(concat_batch(real, fake));
    double l_gan = 0.0;
    for (int i = 0; i < n; ++i) l_gan += std::log(clamp_prob(probs[static_cast<size_t>(i)]));
    for (int i = 0; i < n; ++i)
        l_gan += std::log(1.0 - clamp_prob(probs[static_cast<size_t>(n + i)]));
    l_gan /= n;
    return which == DiscObjective::l_gan ? l_gan : -l_gan;
}

void discriminator_compute_grads(const Tensor& real, const Tensor& fake, Discriminator& disc,
                                 DiscObjective which, double* loss, double* d_real_mean,
                                 double* d_fake_mean) {
    const int n = real.dim(0);
    const std::vector<double> probs = disc.forward_probs(concat_batch(real, fake));
    const double sign = which == DiscObjective::l_gan ? 1.0 : -1.0;
    std::vector<double> dprob(probs.size(), 0.0);
    double l_gan = 0.0, rm = 0.0, fm = 0.0;
    for (int i = 0; i < n; ++i) {
        const double p = probs[static_cast<size_t>(i)];
        l_gan += std::log(clamp_prob(p));
        dprob[static_cast<size_t>(i)] = sign * dlog_clamped(p) / n;
        rm += p;
    }
    for (int i = 0; i < n; ++i) {
        const double p = probs[static_cast<size_t>(n + i)];
        l_gan += std::log(1.0 - clamp_prob(p));
        dprob[static_cast<size_t>(n + i)] = -sign * dlog_clamped(1.0 - p) / n;
        fm += p;
    }
    l_gan /= n;
    disc.backward_from_probs(dprob);
    if (loss) *loss = which == DiscObjective::l_gan ? l_gan : -l_gan;
    if (d_real_mean) *d_real_mean = rm / n;
    if (d_fake_mean) *d_fake_mean = fm / n;
}

StepMetrics train_step(const GanBatch& batch, Generator& gen, Discriminator& disc, Adam& gen_opt,
                       Adam& disc_opt, const GanLossConfig& cfg, int64_t step_index) {
    if (batch.src.dim(0) < 1) throw std::invalid_argument("train_step: empty batch");

    // Discriminator update on (real, fake) with the generator frozen.
    const Tensor fake = gen.forward(concat_channels(batch.src, batch.pose));
    StepMetrics m;
    m.step = step_index;
    discriminator_compute_grads(batch.tgt, fake, disc, DiscObjective::l_d, &m.l_d,
                                &m.d_real_mean, &m.d_fake_mean);
    if (!std::isfinite(m.l_d))
        throw std::runtime_error("train_step " + std::to_string(step_index) +
                                 ": non-finite discriminator loss L_D");
    disc_opt.step();

    // Generator update through the updated discriminator. The generator's
    // forward caches from the fake above are still valid (its params are
    // untouched by the D step), so only the discriminator re-runs.
    const std::vector<double> probs = disc.forward_probs(fake);
    const int n = static_cast<int>(probs.size());
    std::vector<double> dprob(probs.size(), 0.0);
    m.gen_adv = 0.0;
    m.d_fake_mean = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double pc = clamp_prob(probs[i]);
        if (cfg.mode == AdvMode::original) {
            m.gen_adv += std::log(1.0 - pc);
            dprob[i] = -dlog_clamped(1.0 - probs[i]) / n;
        } else {
            m.gen_adv += -std::log(pc);
            dprob[i] = -dlog_clamped(probs[i]) / n;
        }
        m.d_fake_mean += probs[i];
    }
    m.gen_adv /= n;
    m.d_fake_mean /= n;

    Tensor gfake = disc.backward_from_probs(dprob);
    double l1 = 0.0;
    const double inv = 1.0 / static_cast<double>(fake.data.size());
    for (size_t i = 0; i < fake.data.size(); ++i) {
        const double diff = fake.data[i] - batch.tgt.data[i];
        l1 += std::abs(diff);
        gfake.data[i] += cfg.lambda1 * inv * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
    }
    m.l1 = l1 * inv;
    m.l_g = m.gen_adv + cfg.lambda1 * m.l1;
    if (!std::isfinite(m.l_g))
        throw std::runtime_error("train_step " + std::to_string(step_index) +
                                 ": non-finite generator loss L_G");

    gen.backward(gfake);
    gen_opt.step();
    return m;
}

std::vector<StepMetrics> train_pose_gan(const TrainView& view, Generator& gen,
                                        Discriminator& disc, const GanTrainConfig& train_cfg,
                                        const GanLossConfig& loss_cfg,
                                        const StepCallback& callback) {
    if (train_cfg.batch_size < 1 || train_cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train_pose_gan: invalid training config");
    PairSampler sampler(view, train_cfg.include_self_pairs);
    Rng rng(derive_seed(train_cfg.seed, "gan-batches"));
    Adam gen_opt(gen.named_params(), train_cfg.learning_rate, train_cfg.beta1);
    Adam disc_opt(disc.named_params(), train_cfg.learning_rate, train_cfg.beta1);

    std::vector<StepMetrics> history;
    history.reserve(static_cast<size_t>(train_cfg.steps));
    for (int64_t step = 0; step < train_cfg.steps; ++step) {
        const GanBatch batch = sampler.sample_batch(train_cfg.batch_size, rng);
        history.push_back(train_step(batch, gen, disc, gen_opt, disc_opt, loss_cfg, step));
        if (callback) callback(step, history.back());
    }
    return history;
}

std::vector<PersonImage> synthesize_normalized(const PersonImage& img,
                                               const CanonicalPoseSet& canon, Generator& gen) {
    if (canon.poses.empty())
        throw std::invalid_argument("synthesize_normalized: empty canonical pose set");
    std::vector<const Image*> srcs(canon.poses.size(), &img), poses;
    for (const auto& p : canon.poses) poses.push_back(&p);
    const Tensor out =
        gen.forward(concat_channels(images_to_tensor(srcs), images_to_tensor(poses)));
    std::vector<PersonImage> result;
    result.reserve(canon.poses.size());
    for (int i = 0; i < static_cast<int>(canon.poses.size()); ++i)
        result.push_back(tensor_sample_to_image(out, i));
    return result;
}

double mean_pair_l1(const TrainView& view, Generator& gen, bool include_self_pairs) {
    double total = 0.0;
    int count = 0;
    for (const auto& members : view.by_identity) {
        for (int i : members)
            for (int j : members) {
                if (!include_self_pairs && i == j) continue;
                const auto& samples = view.dataset->samples;
                const PersonImage out = generator_forward(
                    samples[static_cast<size_t>(i)].image, samples[static_cast<size_t>(j)].pose, gen);
                total += l1_loss(out, samples[static_cast<size_t>(j)].image);
                ++count;
            }
    }
    if (count == 0) throw std::invalid_argument("mean_pair_l1: no pairs");
    return total / count;
}

}  // namespace posenorm
