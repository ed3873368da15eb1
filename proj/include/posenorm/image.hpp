#pragma once

#include <array>
#include <string>
#include <vector>

#include "posenorm/tensor.hpp"

namespace posenorm {

// Fixed-size 3-channel raster, planar CHW, values in [-1, 1].
// Used both for person crops and for rendered skeleton pose images.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> data;  // 3 * h * w

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), data(static_cast<size_t>(3) * h_ * w_, 0.0) {}

    static Image filled(int h, int w, const std::array<double, 3>& rgb) {
        Image img(h, w);
        for (int c = 0; c < 3; ++c)
            std::fill(img.data.begin() + static_cast<size_t>(c) * h * w,
                      img.data.begin() + static_cast<size_t>(c + 1) * h * w, rgb[c]);
        return img;
    }

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }

    std::array<double, 3> pixel(int y, int x) const {
        return {at(0, y, x), at(1, y, x), at(2, y, x)};
    }
    void set_pixel(int y, int x, const std::array<double, 3>& rgb) {
        at(0, y, x) = rgb[0];
        at(1, y, x) = rgb[1];
        at(2, y, x) = rgb[2];
    }

    bool same_dims(const Image& o) const { return h == o.h && w == o.w; }
    size_t numel() const { return data.size(); }
};

using PoseImage = Image;
using PersonImage = Image;

// Map a color from [0,1] into the image value range [-1,1].
inline std::array<double, 3> to_signed(const std::array<double, 3>& rgb01) {
    return {2.0 * rgb01[0] - 1.0, 2.0 * rgb01[1] - 1.0, 2.0 * rgb01[2] - 1.0};
}

// Copy a batch of images into an {N,3,H,W} tensor and back.
Tensor images_to_tensor(const std::vector<const Image*>& imgs);
Tensor image_to_tensor(const Image& img);
Image tensor_sample_to_image(const Tensor& t, int n);

// Concatenate two 3-channel batches along channels into {N,6,H,W}.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Bilinear resampling (used by the pose embedder).
Image resize_bilinear(const Image& src, int out_h, int out_w);

// Binary PPM (P6) with 8-bit quantization; the project's lossless image format.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

}  // namespace posenorm
