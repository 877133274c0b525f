#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/core/rng.hpp"

namespace mgie::diffusion {

// DDPM noise schedule, linear betas. Endpoints are scaled for the short
// 100-step default so that alpha_bar(T) stays below 0.05 (roughly the same
// integrated noise as the common 1000-step 1e-4..0.02 schedule).
struct NoiseSchedule {
    int t_steps = 100;
    std::vector<double> beta, alpha, alpha_bar;  // index 1..t_steps

    explicit NoiseSchedule(int steps = 100, double beta_start = 1e-3, double beta_end = 0.06) {
        t_steps = steps;
        beta.assign(steps + 1, 0.0);
        alpha.assign(steps + 1, 0.0);
        alpha_bar.assign(steps + 1, 0.0);
        double cum = 1.0;
        for (int t = 1; t <= steps; ++t) {
            beta[t] = steps == 1 ? beta_start
                                 : beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
            alpha[t] = 1.0 - beta[t];
            cum *= alpha[t];
            alpha_bar[t] = cum;
        }
    }
};

// z_t = sqrt(alpha_bar_t) o + sqrt(1 - alpha_bar_t) eps
inline Mat forward_noise(const NoiseSchedule& s, const Mat& o, int t, const Mat& eps) {
    if (t < 1 || t > s.t_steps) throw std::out_of_range("forward_noise: t out of range");
    if (o.rows() != eps.rows() || o.cols() != eps.cols())
        throw std::invalid_argument("forward_noise: shape mismatch");
    double ab = s.alpha_bar[t];
    return std::sqrt(ab) * o + std::sqrt(1.0 - ab) * eps;
}

inline Mat gaussian_like(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

}  // namespace mgie::diffusion
