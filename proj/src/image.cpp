#include "posenorm/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace posenorm {

Tensor images_to_tensor(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int h = imgs[0]->h, w = imgs[0]->w;
    Tensor t({static_cast<int>(imgs.size()), 3, h, w});
    const size_t per = static_cast<size_t>(3) * h * w;
    for (size_t n = 0; n < imgs.size(); ++n) {
        if (imgs[n]->h != h || imgs[n]->w != w)
            throw std::invalid_argument("images_to_tensor: mixed dims in batch");
        std::copy(imgs[n]->data.begin(), imgs[n]->data.end(), t.data.begin() + n * per);
    }
    return t;
}

Tensor image_to_tensor(const Image& img) {
    return images_to_tensor({&img});
}

Image tensor_sample_to_image(const Tensor& t, int n) {
    if (t.shape.size() != 4 || t.dim(1) != 3)
        throw std::invalid_argument("tensor_sample_to_image: expected {N,3,H,W}, got " + t.shape_str());
    Image img(t.dim(2), t.dim(3));
    const size_t per = img.numel();
    std::copy(t.data.begin() + n * per, t.data.begin() + (n + 1) * per, img.data.begin());
    return img;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 4 || b.shape.size() != 4 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor out({n, ca + cb, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::copy(a.data.begin() + i * ca * plane, a.data.begin() + (i + 1) * ca * plane,
                  out.data.begin() + i * (ca + cb) * plane);
        std::copy(b.data.begin() + i * cb * plane, b.data.begin() + (i + 1) * cb * plane,
                  out.data.begin() + (i * (ca + cb) + ca) * plane);
    }
    return out;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw std::invalid_argument("resize_bilinear: output dims must be positive");
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.h - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.w - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src.w - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1);
                const double bot = (1.0 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1);
                dst.at(c, y, x) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return dst;
}

namespace {

unsigned char quantize(double v) {
    const double t = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(t * 255.0));
}

}  // namespace

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<size_t>(x) * 3 + c] = quantize(img.at(c, y, x));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
        throw std::runtime_error("read_ppm: unsupported PPM header in " + path);
    in.get();  // single whitespace after header
    Image img(h, w);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw std::runtime_error("read_ppm: truncated file " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = row[static_cast<size_t>(x) * 3 + c] / 255.0 * 2.0 - 1.0;
    }
    return img;
}

}  // namespace posenorm
