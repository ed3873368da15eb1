#include "posenorm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace posenorm {

void init_normal(Tensor& t, Rng& rng, double stddev) {
    for (double& v : t.data) v = rng.normal(0.0, stddev);
}

void axpy(double a, const Tensor& x, Tensor& y) {
    check_same_shape(x, y, "axpy");
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] += a * x.data[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (size_t i = 0; i < b.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_c, int out_c, int k, int stride, int pad, bool bias)
    : in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride),
      pad_(pad),
      bias_(bias),
      w_({out_c, in_c * k * k}),
      b_({bias ? out_c : 0}),
      gw_({out_c, in_c * k * k}),
      gb_({bias ? out_c : 0}) {}

void Conv2d::init(Rng& rng, double w_std) {
    init_normal(w_, rng, w_std);
    b_.zero();
}

namespace {

void im2col(const double* x, int n, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* col) {
    const int64_t cols = static_cast<int64_t>(n) * ho * wo;
    for (int ci = 0; ci < c; ++ci) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const int64_t row = (static_cast<int64_t>(ci) * k + ki) * k + kj;
                double* dst = col + row * cols;
                for (int ni = 0; ni < n; ++ni) {
                    const double* src = x + (static_cast<int64_t>(ni) * c + ci) * h * w;
                    for (int yo = 0; yo < ho; ++yo) {
                        const int yi = yo * stride - pad + ki;
                        if (yi < 0 || yi >= h) {
                            std::fill(dst, dst + wo, 0.0);
                            dst += wo;
                            continue;
                        }
                        const double* src_row = src + static_cast<int64_t>(yi) * w;
                        int xo = 0;
                        for (; xo < wo; ++xo) {
                            const int xi = xo * stride - pad + kj;
                            *dst++ = (xi >= 0 && xi < w) ? src_row[xi] : 0.0;
                        }
                    }
                }
            }
        }
    }
}

void col2im(const double* col, int n, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* x) {
    std::fill(x, x + static_cast<int64_t>(n) * c * h * w, 0.0);
    const int64_t cols = static_cast<int64_t>(n) * ho * wo;
    for (int ci = 0; ci < c; ++ci) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const int64_t row = (static_cast<int64_t>(ci) * k + ki) * k + kj;
                const double* src = col + row * cols;
                for (int ni = 0; ni < n; ++ni) {
                    double* dst = x + (static_cast<int64_t>(ni) * c + ci) * h * w;
                    for (int yo = 0; yo < ho; ++yo) {
                        const int yi = yo * stride - pad + ki;
                        if (yi < 0 || yi >= h) {
                            src += wo;
                            continue;
                        }
                        double* dst_row = dst + static_cast<int64_t>(yi) * w;
                        for (int xo = 0; xo < wo; ++xo) {
                            const int xi = xo * stride - pad + kj;
                            if (xi >= 0 && xi < w) dst_row[xi] += *src;
                            ++src;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) {
    if (x.shape.size() != 4 || x.dim(1) != in_c_)
        throw std::invalid_argument("Conv2d: expected {N," + std::to_string(in_c_) +
                                    ",H,W}, got " + x.shape_str());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = out_dim(h, k_, stride_, pad_);
    const int wo = out_dim(w, k_, stride_, pad_);
    if (ho <= 0 || wo <= 0)
        throw std::invalid_argument("Conv2d: input " + x.shape_str() + " too small for kernel");
    x_shape_ = x.shape;

    const int ckk = in_c_ * k_ * k_;
    const int64_t cols = static_cast<int64_t>(n) * ho * wo;
    col_ = Tensor({ckk, static_cast<int>(cols)});
    im2col(x.ptr(), n, in_c_, h, w, k_, stride_, pad_, ho, wo, col_.ptr());

    Tensor y_mat({out_c_, static_cast<int>(cols)});
    gemm(false, false, out_c_, static_cast<int>(cols), ckk, 1.0, w_.ptr(), ckk, col_.ptr(),
         static_cast<int>(cols), 0.0, y_mat.ptr(), static_cast<int>(cols));

    Tensor y({n, out_c_, ho, wo});
    const int64_t plane = static_cast<int64_t>(ho) * wo;
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < out_c_; ++co) {
            const double* src = y_mat.ptr() + co * cols + ni * plane;
            double* dst = y.ptr() + (static_cast<int64_t>(ni) * out_c_ + co) * plane;
            const double bias = bias_ ? b_.data[static_cast<size_t>(co)] : 0.0;
            for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] + bias;
        }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int n = x_shape_[0], h = x_shape_[2], w = x_shape_[3];
    const int ho = gy.dim(2), wo = gy.dim(3);
    const int ckk = in_c_ * k_ * k_;
    const int64_t cols = static_cast<int64_t>(n) * ho * wo;
    const int64_t plane = static_cast<int64_t>(ho) * wo;

    // Regroup gy into the GEMM layout {out_c, N*Ho*Wo}.
    Tensor gy_mat({out_c_, static_cast<int>(cols)});
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < out_c_; ++co)
            std::copy(gy.ptr() + (static_cast<int64_t>(ni) * out_c_ + co) * plane,
                      gy.ptr() + (static_cast<int64_t>(ni) * out_c_ + co + 1) * plane,
                      gy_mat.ptr() + co * cols + ni * plane);

    // dW = gy_mat * col^T
    gemm(false, true, out_c_, ckk, static_cast<int>(cols), 1.0, gy_mat.ptr(),
         static_cast<int>(cols), col_.ptr(), static_cast<int>(cols), 0.0, gw_.ptr(), ckk);
    if (bias_) {
        for (int co = 0; co < out_c_; ++co) {
            double s = 0.0;
            const double* row = gy_mat.ptr() + co * cols;
            for (int64_t i = 0; i < cols; ++i) s += row[i];
            gb_.data[static_cast<size_t>(co)] = s;
        }
    }

    // dX = col2im(W^T * gy_mat)
    Tensor gcol({ckk, static_cast<int>(cols)});
    gemm(true, false, ckk, static_cast<int>(cols), out_c_, 1.0, w_.ptr(), ckk, gy_mat.ptr(),
         static_cast<int>(cols), 0.0, gcol.ptr(), static_cast<int>(cols));
    Tensor gx(x_shape_);
    col2im(gcol.ptr(), n, in_c_, h, w, k_, stride_, pad_, ho, wo, gx.ptr());
    return gx;
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    if (bias_) out.push_back({prefix + ".b", &b_, &gb_});
}

// ---------------------------------------------------------- InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(int c, double eps)
    : c_(c), eps_(eps), gamma_({c}), beta_({c}), ggamma_({c}), gbeta_({c}) {
    std::fill(gamma_.data.begin(), gamma_.data.end(), 1.0);
}

Tensor InstanceNorm2d::forward(const Tensor& x) {
    if (x.shape.size() != 4 || x.dim(1) != c_)
        throw std::invalid_argument("InstanceNorm2d: bad input " + x.shape_str());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t m = static_cast<int64_t>(h) * w;
    Tensor y(x.shape);
    xhat_ = Tensor(x.shape);
    inv_std_.assign(static_cast<size_t>(n) * c_, 0.0);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c_; ++ci) {
            const double* xs = x.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            double mean = 0.0;
            for (int64_t i = 0; i < m; ++i) mean += xs[i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                const double d = xs[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const double istd = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<size_t>(ni) * c_ + ci] = istd;
            const double g = gamma_.data[static_cast<size_t>(ci)];
            const double b = beta_.data[static_cast<size_t>(ci)];
            double* xh = xhat_.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            double* ys = y.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            for (int64_t i = 0; i < m; ++i) {
                xh[i] = (xs[i] - mean) * istd;
                ys[i] = g * xh[i] + b;
            }
        }
    return y;
}

Tensor InstanceNorm2d::backward(const Tensor& gy) {
    const int n = gy.dim(0), h = gy.dim(2), w = gy.dim(3);
    const int64_t m = static_cast<int64_t>(h) * w;
    Tensor gx(gy.shape);
    ggamma_.zero();
    gbeta_.zero();
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c_; ++ci) {
            const double* gys = gy.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            const double* xh = xhat_.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            const double g = gamma_.data[static_cast<size_t>(ci)];
            const double istd = inv_std_[static_cast<size_t>(ni) * c_ + ci];
            double sum_g = 0.0, sum_gx = 0.0, sum_raw = 0.0, sum_rawx = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                sum_raw += gys[i];
                sum_rawx += gys[i] * xh[i];
            }
            sum_g = g * sum_raw;
            sum_gx = g * sum_rawx;
            double* gxs = gx.ptr() + (static_cast<int64_t>(ni) * c_ + ci) * m;
            const double inv_m = 1.0 / static_cast<double>(m);
            for (int64_t i = 0; i < m; ++i) {
                const double gxhat = g * gys[i];
                gxs[i] = istd * (gxhat - sum_g * inv_m - xh[i] * sum_gx * inv_m);
            }
            ggamma_.data[static_cast<size_t>(ci)] += sum_rawx;
            gbeta_.data[static_cast<size_t>(ci)] += sum_raw;
        }
    return gx;
}

void InstanceNorm2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
    out.push_back({prefix + ".beta", &beta_, &gbeta_});
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x) {
    Tensor y = x;
    mask_.assign(x.data.size(), 0);
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] > 0.0)
            mask_[i] = 1;
        else
            y.data[i] = 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
        if (!mask_[i]) gx.data[i] = 0.0;
    return gx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
    Tensor y = x;
    mask_.assign(x.data.size(), 0);
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] > 0.0)
            mask_[i] = 1;
        else
            y.data[i] *= slope_;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
        if (!mask_[i]) gx.data[i] *= slope_;
    return gx;
}

Tensor Tanh::forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = std::tanh(v);
    y_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= 1.0 - y_.data[i] * y_.data[i];
    return gx;
}

// ------------------------------------------------------------- upsample

Tensor UpsampleNearest2x::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    x_shape_ = x.shape;
    Tensor y({n, c, 2 * h, 2 * w});
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.ptr() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            double* dst = y.ptr() + (static_cast<int64_t>(ni) * c + ci) * 4 * h * w;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const double v = src[yy * w + xx];
                    const int64_t base = static_cast<int64_t>(2 * yy) * 2 * w + 2 * xx;
                    dst[base] = v;
                    dst[base + 1] = v;
                    dst[base + 2 * w] = v;
                    dst[base + 2 * w + 1] = v;
                }
        }
    return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& gy) {
    const int n = x_shape_[0], c = x_shape_[1], h = x_shape_[2], w = x_shape_[3];
    Tensor gx(x_shape_);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            double* dst = gx.ptr() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            const double* src = gy.ptr() + (static_cast<int64_t>(ni) * c + ci) * 4 * h * w;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const int64_t base = static_cast<int64_t>(2 * yy) * 2 * w + 2 * xx;
                    dst[yy * w + xx] =
                        src[base] + src[base + 1] + src[base + 2 * w] + src[base + 2 * w + 1];
                }
        }
    return gx;
}

// --------------------------------------------------------------- Linear

Linear::Linear(int in, int out)
    : in_(in), out_(out), w_({out, in}), b_({out}), gw_({out, in}), gb_({out}) {}

void Linear::init(Rng& rng, double w_std) {
    init_normal(w_, rng, w_std);
    b_.zero();
}

Tensor Linear::forward(const Tensor& x) {
    if (x.shape.size() != 2 || x.dim(1) != in_)
        throw std::invalid_argument("Linear: expected {N," + std::to_string(in_) + "}, got " +
                                    x.shape_str());
    x_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_});
    gemm(false, true, n, out_, in_, 1.0, x.ptr(), in_, w_.ptr(), in_, 0.0, y.ptr(), out_);
    for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < out_; ++o) y.data[static_cast<size_t>(ni) * out_ + o] += b_.data[static_cast<size_t>(o)];
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    const int n = x_.dim(0);
    gemm(true, false, out_, in_, n, 1.0, gy.ptr(), out_, x_.ptr(), in_, 0.0, gw_.ptr(), in_);
    for (int o = 0; o < out_; ++o) {
        double s = 0.0;
        for (int ni = 0; ni < n; ++ni) s += gy.data[static_cast<size_t>(ni) * out_ + o];
        gb_.data[static_cast<size_t>(o)] = s;
    }
    Tensor gx({n, in_});
    gemm(false, false, n, in_, out_, 1.0, gy.ptr(), out_, w_.ptr(), in_, 0.0, gx.ptr(), in_);
    return gx;
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

// -------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, bool training, Rng* rng) {
    active_ = training && p_ > 0.0;
    if (!active_) return x;
    if (!rng) throw std::invalid_argument("Dropout: training mode requires an RNG");
    Tensor y = x;
    mask_.assign(x.data.size(), 0.0);
    const double keep = 1.0 - p_;
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (rng->uniform() >= p_) mask_[i] = 1.0 / keep;
        y.data[i] *= mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    if (!active_) return gy;
    Tensor gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= mask_[i];
    return gx;
}

// -------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1);
    const int64_t m = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    x_shape_ = x.shape;
    Tensor y({n, c});
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.ptr() + (static_cast<int64_t>(ni) * c + ci) * m;
            double s = 0.0;
            for (int64_t i = 0; i < m; ++i) s += src[i];
            y.data[static_cast<size_t>(ni) * c + ci] = s / static_cast<double>(m);
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
    const int n = x_shape_[0], c = x_shape_[1];
    const int64_t m = static_cast<int64_t>(x_shape_[2]) * x_shape_[3];
    Tensor gx(x_shape_);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const double g = gy.data[static_cast<size_t>(ni) * c + ci] / static_cast<double>(m);
            double* dst = gx.ptr() + (static_cast<int64_t>(ni) * c + ci) * m;
            for (int64_t i = 0; i < m; ++i) dst[i] = g;
        }
    return gx;
}

// -------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int c, bool with_norm, bool post_relu)
    : with_norm_(with_norm),
      post_relu_(post_relu),
      c1_(c, c, 3, 1, 1, !with_norm),
      c2_(c, c, 3, 1, 1, !with_norm),
      n1_(c),
      n2_(c) {}

void ResidualBlock::init(Rng& rng, double w_std) {
    c1_.init(rng, w_std);
    c2_.init(rng, w_std);
}

Tensor ResidualBlock::forward(const Tensor& x) {
    Tensor t = c1_.forward(x);
    if (with_norm_) t = n1_.forward(t);
    t = r1_.forward(t);
    t = c2_.forward(t);
    if (with_norm_) t = n2_.forward(t);
    Tensor y = add(t, x);
    if (post_relu_) y = r2_.forward(y);
    return y;
}

Tensor ResidualBlock::backward(const Tensor& gy) {
    Tensor g = gy;
    if (post_relu_) g = r2_.backward(g);
    Tensor gb = g;
    if (with_norm_) gb = n2_.backward(gb);
    gb = c2_.backward(gb);
    gb = r1_.backward(gb);
    if (with_norm_) gb = n1_.backward(gb);
    gb = c1_.backward(gb);
    return add(gb, g);
}

void ResidualBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    c1_.collect(prefix + ".conv1", out);
    if (with_norm_) n1_.collect(prefix + ".norm1", out);
    c2_.collect(prefix + ".conv2", out);
    if (with_norm_) n2_.collect(prefix + ".norm2", out);
}

// ----------------------------------------------------------------- Adam

Adam::Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.value->data.size(), 0.0);
        v_.emplace_back(p.value->data.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        auto& w = params_[pi].value->data;
        const auto& g = params_[pi].grad->data;
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace posenorm
