#pragma once

#include <string>
#include <vector>

#include "posenorm/rng.hpp"
#include "posenorm/tensor.hpp"

namespace posenorm {

// A parameter tensor with its gradient buffer, addressable by name for
// checkpointing and optimizer binding. Pointers refer into layer storage and
// stay valid for the life of the owning network.
struct NamedParam {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

// 2-D convolution on {N,C,H,W} batches via im2col + GEMM. Weights are stored
// as {out_c, in_c*k*k}; biases as {out_c}. Convolutions feeding a
// normalization layer are built without a bias (the normalization cancels it).
class Conv2d {
public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad, bool bias = true);

    void init(Rng& rng, double w_std);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);  // overwrites gw/gb, returns gx
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

    static int out_dim(int in, int k, int stride, int pad) {
        return (in + 2 * pad - k) / stride + 1;
    }

    int in_c() const { return in_c_; }
    int out_c() const { return out_c_; }

private:
    int in_c_, out_c_, k_, stride_, pad_;
    bool bias_;
    Tensor w_, b_, gw_, gb_;
    Tensor col_;                 // cached im2col of the last forward input
    std::vector<int> x_shape_;   // cached input shape
};

// Per-sample per-channel normalization with learned scale and offset.
class InstanceNorm2d {
public:
    explicit InstanceNorm2d(int c, double eps = 1e-5);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

private:
    int c_;
    double eps_;
    Tensor gamma_, beta_, ggamma_, gbeta_;
    Tensor xhat_;
    std::vector<double> inv_std_;  // per (n,c)
};

class ReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    std::vector<unsigned char> mask_;
};

class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    double slope_;
    std::vector<unsigned char> mask_;
};

class Tanh {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    Tensor y_;
};

class UpsampleNearest2x {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    std::vector<int> x_shape_;
};

// Fully connected layer on {N, in} batches.
class Linear {
public:
    Linear(int in, int out);

    void init(Rng& rng, double w_std);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

private:
    int in_, out_;
    Tensor w_, b_, gw_, gb_;
    Tensor x_;
};

// Inverted dropout; identity when not training.
class Dropout {
public:
    explicit Dropout(double p) : p_(p) {}

    void set_rate(double p) { p_ = p; }
    double rate() const { return p_; }

    Tensor forward(const Tensor& x, bool training, Rng* rng);
    Tensor backward(const Tensor& gy);

private:
    double p_;
    std::vector<double> mask_;
    bool active_ = false;
};

// Mean over the spatial extent: {N,C,H,W} -> {N,C}.
class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    std::vector<int> x_shape_;
};

// Residual block with an additive skip. The translation-net flavor
// (with_norm, no post activation) is an exact identity when its convolutions
// are zeroed; the classifier flavor (no norm, post-activation) keeps pooled
// statistics informative.
class ResidualBlock {
public:
    explicit ResidualBlock(int c, bool with_norm = true, bool post_relu = false);

    void init(Rng& rng, double w_std);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

private:
    bool with_norm_, post_relu_;
    Conv2d c1_, c2_;
    InstanceNorm2d n1_, n2_;
    ReLU r1_, r2_;
};

// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    int64_t t() const { return t_; }

private:
    std::vector<NamedParam> params_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

void init_normal(Tensor& t, Rng& rng, double stddev);

// Elementwise helpers.
void axpy(double a, const Tensor& x, Tensor& y);  // y += a*x
Tensor add(const Tensor& a, const Tensor& b);

}  // namespace posenorm
