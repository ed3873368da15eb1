#pragma once

#include <memory>
#include <vector>

#include "posenorm/image.hpp"
#include "posenorm/layers.hpp"

namespace posenorm {

struct ArchConfig {
    int base_channels = 32;
    int n_res_blocks = 9;
    int h = 64;
    int w = 32;
    int discriminator_layers = 4;

    void validate() const;
};

// Residual encoder-decoder translator. Input is the person image concatenated
// with the target pose image ({N,6,H,W}); output is a tanh-bounded image.
class Generator {
public:
    explicit Generator(const ArchConfig& arch);

    void init(Rng& rng);
    Tensor forward(const Tensor& x6);
    Tensor backward(const Tensor& gy);
    std::vector<NamedParam> named_params();
    const ArchConfig& arch() const { return arch_; }

private:
    ArchConfig arch_;
    Conv2d stem_;
    InstanceNorm2d stem_n_;
    ReLU stem_r_;
    Conv2d down1_, down2_;
    InstanceNorm2d down1_n_, down2_n_;
    ReLU down1_r_, down2_r_;
    std::vector<ResidualBlock> blocks_;
    UpsampleNearest2x up1_s_, up2_s_;
    Conv2d up1_, up2_;
    InstanceNorm2d up1_n_, up2_n_;
    ReLU up1_r_, up2_r_;
    Conv2d out_;
    Tanh out_t_;
};

// Patch discriminator: stride-2 convolutions with leaky rectification, a
// 1-channel head, per-patch logistic, and a spatial average to one
// probability per sample.
class Discriminator {
public:
    explicit Discriminator(const ArchConfig& arch);

    void init(Rng& rng);

    // Probability per sample, strictly inside (0,1).
    std::vector<double> forward_probs(const Tensor& x);
    // Backprop d(loss)/d(prob) through the patch average and the conv stack.
    Tensor backward_from_probs(const std::vector<double>& dloss_dprob);

    std::vector<NamedParam> named_params();
    int n_patches() const { return n_patches_; }

private:
    ArchConfig arch_;
    std::vector<Conv2d> convs_;
    std::vector<LeakyReLU> acts_;
    Conv2d head_;
    Tensor patch_probs_;  // logistic of patch logits, cached for backward
    int n_patches_ = 0;
};

// Deterministic construction of both networks from one seed.
struct GanNetworks {
    Generator generator;
    Discriminator discriminator;
};
GanNetworks init_params(const ArchConfig& arch, uint64_t seed);

// Single-image conveniences matching the pipeline surface.
PersonImage generator_forward(const PersonImage& img, const PoseImage& pose, Generator& gen);
double discriminator_forward(const PersonImage& img, Discriminator& disc);

// Patch-average reduction used by the discriminator head (exposed for tests).
double mean_probability(const std::vector<double>& patch_probs);

}  // namespace posenorm
