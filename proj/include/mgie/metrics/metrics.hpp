#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "mgie/core/image.hpp"
#include "mgie/metrics/embedder.hpp"

namespace mgie::metrics {

inline double l1_distance(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("l1_distance: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

inline Eigen::MatrixXd luminance(const Image& im) {
    Eigen::MatrixXd y(im.h, im.w);
    for (int r = 0; r < im.h; ++r)
        for (int c = 0; c < im.w; ++c)
            y(r, c) = 0.299 * im.at(r, c, 0) + 0.587 * im.at(r, c, 1) + 0.114 * im.at(r, c, 2);
    return y;
}

// Structural similarity on the luminance channel: 8x8 uniform window slid
// with stride 1 over all valid positions, biased (divide-by-N) moments,
// C1 = (0.01)^2 and C2 = (0.03)^2 for a unit dynamic range; mean over
// windows.
inline double ssim(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("ssim: shape mismatch");
    constexpr int win = 8;
    if (a.h < win || a.w < win) throw std::invalid_argument("ssim: image smaller than window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    Eigen::MatrixXd ya = luminance(a), yb = luminance(b);
    double total = 0.0;
    int count = 0;
    const double n = win * win;
    for (int r = 0; r + win <= a.h; ++r)
        for (int c = 0; c + win <= a.w; ++c) {
            auto wa = ya.block(r, c, win, win);
            auto wb = yb.block(r, c, win, win);
            double ma = wa.mean(), mb = wb.mean();
            double va = wa.array().square().sum() / n - ma * ma;
            double vb = wb.array().square().sum() / n - mb * mb;
            double cov = wa.cwiseProduct(wb).sum() / n - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return a.dot(b) / (na * nb);
}

inline double perceptual_distance(const Image& a, const Image& b, const Embedder& e) {
    return 1.0 - cosine(e.embed_image(a), e.embed_image(b));
}

inline double text_visual_similarity(const std::string& caption, const Image& im,
                                     const Embedder& e) {
    return cosine(e.embed_text(caption), e.embed_image(im));
}

// Cosine between the image-space and text-space edit directions, zero when
// either direction vanishes.
inline double directional_similarity(const Image& input_img, const Image& edited_img,
                                     const std::string& input_caption,
                                     const std::string& edit_caption, const Embedder& e) {
    Eigen::VectorXd di = e.embed_image(edited_img) - e.embed_image(input_img);
    Eigen::VectorXd dt = e.embed_text(edit_caption) - e.embed_text(input_caption);
    if (di.norm() < 1e-8 || dt.norm() < 1e-8) return 0.0;
    return cosine(di, dt);
}

}  // namespace mgie::metrics
