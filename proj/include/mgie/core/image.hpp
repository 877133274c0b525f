#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

namespace mgie {

// H x W x 3 image, values in [0,1], row-major, RGB interleaved.
struct Image {
    int h = 0, w = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_, double fill = 0.0) : h(h_), w(w_), data(static_cast<size_t>(h_) * w_ * 3, fill) {}

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    void clip01() {
        for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    }

    // (H*W, 3) pixel matrix, for feeding conv stacks.
    Eigen::MatrixXd to_matrix() const {
        Eigen::MatrixXd m(h * w, 3);
        for (int p = 0; p < h * w; ++p)
            for (int c = 0; c < 3; ++c) m(p, c) = data[static_cast<size_t>(p) * 3 + c];
        return m;
    }

    static Image from_matrix(const Eigen::MatrixXd& m, int h, int w) {
        assert(m.rows() == h * w && m.cols() == 3);
        Image im(h, w);
        for (int p = 0; p < h * w; ++p)
            for (int c = 0; c < 3; ++c) im.data[static_cast<size_t>(p) * 3 + c] = m(p, c);
        return im;
    }
};

inline double image_l1(const Image& a, const Image& b) {
    assert(a.h == b.h && a.w == b.w);
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

// Box downsample by integer factor.
inline Image downsample(const Image& im, int factor) {
    assert(im.h % factor == 0 && im.w % factor == 0);
    Image out(im.h / factor, im.w / factor);
    double inv = 1.0 / (factor * factor);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += im.at(y * factor + dy, x * factor + dx, c);
                out.at(y, x, c) = s * inv;
            }
    return out;
}

}  // namespace mgie
