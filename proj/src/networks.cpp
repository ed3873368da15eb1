#include "posenorm/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace posenorm {

namespace {
constexpr double kInitStd = 0.02;
}

void ArchConfig::validate() const {
    if (base_channels < 1) throw std::invalid_argument("ArchConfig: base_channels must be >= 1");
    if (n_res_blocks < 1) throw std::invalid_argument("ArchConfig: n_res_blocks must be >= 1");
    if (h < 4 || w < 4 || h % 4 != 0 || w % 4 != 0)
        throw std::invalid_argument("ArchConfig: h and w must be positive and divisible by 4");
    if (discriminator_layers < 1)
        throw std::invalid_argument("ArchConfig: discriminator_layers must be >= 1");
}

// ------------------------------------------------------------- Generator

Generator::Generator(const ArchConfig& arch)
    : arch_(arch),
      stem_(6, arch.base_channels, 3, 1, 1, false),
      stem_n_(arch.base_channels),
      down1_(arch.base_channels, 2 * arch.base_channels, 3, 2, 1, false),
      down2_(2 * arch.base_channels, 4 * arch.base_channels, 3, 2, 1, false),
      down1_n_(2 * arch.base_channels),
      down2_n_(4 * arch.base_channels),
      up1_(4 * arch.base_channels, 2 * arch.base_channels, 3, 1, 1, false),
      up2_(2 * arch.base_channels, arch.base_channels, 3, 1, 1, false),
      up1_n_(2 * arch.base_channels),
      up2_n_(arch.base_channels),
      out_(arch.base_channels, 3, 3, 1, 1) {
    arch.validate();
    blocks_.reserve(static_cast<size_t>(arch.n_res_blocks));
    for (int i = 0; i < arch.n_res_blocks; ++i) blocks_.emplace_back(4 * arch.base_channels);
}

void Generator::init(Rng& rng) {
    stem_.init(rng, kInitStd);
    down1_.init(rng, kInitStd);
    down2_.init(rng, kInitStd);
    for (auto& b : blocks_) b.init(rng, kInitStd);
    up1_.init(rng, kInitStd);
    up2_.init(rng, kInitStd);
    out_.init(rng, kInitStd);
}

Tensor Generator::forward(const Tensor& x6) {
    if (x6.shape.size() != 4 || x6.dim(1) != 6 || x6.dim(2) != arch_.h || x6.dim(3) != arch_.w)
        throw std::invalid_argument("Generator: expected {N,6," + std::to_string(arch_.h) + "," +
                                    std::to_string(arch_.w) + "}, got " + x6.shape_str());
    Tensor t = stem_r_.forward(stem_n_.forward(stem_.forward(x6)));
    t = down1_r_.forward(down1_n_.forward(down1_.forward(t)));
    t = down2_r_.forward(down2_n_.forward(down2_.forward(t)));
    for (auto& b : blocks_) t = b.forward(t);
    t = up1_r_.forward(up1_n_.forward(up1_.forward(up1_s_.forward(t))));
    t = up2_r_.forward(up2_n_.forward(up2_.forward(up2_s_.forward(t))));
    return out_t_.forward(out_.forward(t));
}

Tensor Generator::backward(const Tensor& gy) {
    Tensor g = out_.backward(out_t_.backward(gy));
    g = up2_s_.backward(up2_.backward(up2_n_.backward(up2_r_.backward(g))));
    g = up1_s_.backward(up1_.backward(up1_n_.backward(up1_r_.backward(g))));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    g = down2_.backward(down2_n_.backward(down2_r_.backward(g)));
    g = down1_.backward(down1_n_.backward(down1_r_.backward(g)));
    return stem_.backward(stem_n_.backward(stem_r_.backward(g)));
}

std::vector<NamedParam> Generator::named_params() {
    std::vector<NamedParam> out;
    stem_.collect("stem.conv", out);
    stem_n_.collect("stem.norm", out);
    down1_.collect("down1.conv", out);
    down1_n_.collect("down1.norm", out);
    down2_.collect("down2.conv", out);
    down2_n_.collect("down2.norm", out);
    for (size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].collect("res" + std::to_string(i), out);
    up1_.collect("up1.conv", out);
    up1_n_.collect("up1.norm", out);
    up2_.collect("up2.conv", out);
    up2_n_.collect("up2.norm", out);
    out_.collect("out.conv", out);
    return out;
}

// --------------------------------------------------------- Discriminator

namespace {
int disc_channels(const ArchConfig& arch, int layer) {
    return arch.base_channels * std::min(1 << layer, 8);
}
}  // namespace

Discriminator::Discriminator(const ArchConfig& arch)
    : arch_(arch), head_(disc_channels(arch, arch.discriminator_layers - 1), 1, 3, 1, 1) {
    arch.validate();
    int in_c = 3;
    int h = arch.h, w = arch.w;
    for (int i = 0; i < arch.discriminator_layers; ++i) {
        const int out_c = disc_channels(arch, i);
        convs_.emplace_back(in_c, out_c, 4, 2, 1);
        acts_.emplace_back(0.2);
        in_c = out_c;
        h = Conv2d::out_dim(h, 4, 2, 1);
        w = Conv2d::out_dim(w, 4, 2, 1);
        if (h < 1 || w < 1)
            throw std::invalid_argument(
                "ArchConfig: discriminator_layers too deep for input dims");
    }
    n_patches_ = h * w;
}

void Discriminator::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng, kInitStd);
    head_.init(rng, kInitStd);
}

double mean_probability(const std::vector<double>& patch_probs) {
    if (patch_probs.empty()) throw std::invalid_argument("mean_probability: empty patch map");
    double s = 0.0;
    for (double p : patch_probs) s += p;
    return s / static_cast<double>(patch_probs.size());
}

std::vector<double> Discriminator::forward_probs(const Tensor& x) {
    if (x.shape.size() != 4 || x.dim(1) != 3 || x.dim(2) != arch_.h || x.dim(3) != arch_.w)
        throw std::invalid_argument("Discriminator: expected {N,3," + std::to_string(arch_.h) +
                                    "," + std::to_string(arch_.w) + "}, got " + x.shape_str());
    Tensor t = x;
    for (size_t i = 0; i < convs_.size(); ++i) t = acts_[i].forward(convs_[i].forward(t));
    Tensor logits = head_.forward(t);  // {N,1,h',w'}
    patch_probs_ = logits;
    for (double& v : patch_probs_.data) v = 1.0 / (1.0 + std::exp(-v));

    const int n = logits.dim(0);
    const int64_t p = static_cast<int64_t>(logits.dim(2)) * logits.dim(3);
    std::vector<double> probs(static_cast<size_t>(n));
    for (int ni = 0; ni < n; ++ni) {
        double s = 0.0;
        const double* src = patch_probs_.ptr() + ni * p;
        for (int64_t i = 0; i < p; ++i) s += src[i];
        probs[static_cast<size_t>(ni)] = s / static_cast<double>(p);
    }
    return probs;
}

Tensor Discriminator::backward_from_probs(const std::vector<double>& dloss_dprob) {
    const int n = patch_probs_.dim(0);
    const int64_t p = static_cast<int64_t>(patch_probs_.dim(2)) * patch_probs_.dim(3);
    if (static_cast<int>(dloss_dprob.size()) != n)
        throw std::invalid_argument("Discriminator::backward_from_probs: batch size mismatch");
    Tensor glogits(patch_probs_.shape);
    for (int ni = 0; ni < n; ++ni) {
        const double gd = dloss_dprob[static_cast<size_t>(ni)] / static_cast<double>(p);
        const double* pp = patch_probs_.ptr() + ni * p;
        double* gl = glogits.ptr() + ni * p;
        for (int64_t i = 0; i < p; ++i) gl[i] = gd * pp[i] * (1.0 - pp[i]);
    }
    Tensor g = head_.backward(glogits);
    for (size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(acts_[i].backward(g));
    return g;
}

std::vector<NamedParam> Discriminator::named_params() {
    std::vector<NamedParam> out;
    for (size_t i = 0; i < convs_.size(); ++i)
        convs_[i].collect("conv" + std::to_string(i), out);
    head_.collect("head", out);
    return out;
}

// ----------------------------------------------------------- conveniences

GanNetworks init_params(const ArchConfig& arch, uint64_t seed) {
    arch.validate();
    Rng gen_rng(derive_seed(seed, "generator"));
    Rng disc_rng(derive_seed(seed, "discriminator"));
    GanNetworks nets{Generator(arch), Discriminator(arch)};
    nets.generator.init(gen_rng);
    nets.discriminator.init(disc_rng);
    return nets;
}

PersonImage generator_forward(const PersonImage& img, const PoseImage& pose, Generator& gen) {
    if (!img.same_dims(pose))
        throw std::invalid_argument("generator_forward: image dims (" + std::to_string(img.h) +
                                    "x" + std::to_string(img.w) + ") do not match pose dims (" +
                                    std::to_string(pose.h) + "x" + std::to_string(pose.w) + ")");
    const Tensor x6 = concat_channels(image_to_tensor(img), image_to_tensor(pose));
    return tensor_sample_to_image(gen.forward(x6), 0);
}

double discriminator_forward(const PersonImage& img, Discriminator& disc) {
    return disc.forward_probs(image_to_tensor(img))[0];
}

}  // namespace posenorm
