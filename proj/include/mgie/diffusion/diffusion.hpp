#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/diffusion/schedule.hpp"

namespace mgie::diffusion {

// Differentiable noise-prediction objective. The predictor maps the noised
// latent and timestep to a noise estimate inside the caller's graph, so
// gradient flows into whatever conditioning the predictor closes over.
using EpsPredictor = std::function<Var(Graph&, Var z_t, int t)>;

inline Var edit_loss(Graph& g, const NoiseSchedule& s, const Mat& goal_latent, int t,
                     const Mat& eps, const EpsPredictor& predict) {
    Mat z_t = forward_noise(s, goal_latent, t, eps);
    Var eps_hat = predict(g, g.constant(z_t), t);
    return g.mse(eps_hat, g.constant(eps));
}

// Score function for classifier-free guidance: evaluates the model with the
// image condition and/or the edit guidance replaced by their learned nulls.
using CondScoreFn = std::function<Mat(const Mat& z_t, int t, bool use_image, bool use_guidance)>;

// s = s(none,none) + alpha_v * (s(img,none) - s(none,none))
//   + alpha_x * (s(img,guide) - s(img,none))
inline Mat cfg_score(const CondScoreFn& score, const Mat& z_t, int t, double alpha_v,
                     double alpha_x) {
    Mat e00 = score(z_t, t, false, false);
    Mat ev0 = score(z_t, t, true, false);
    Mat evx = score(z_t, t, true, true);
    return e00 + alpha_v * (ev0 - e00) + alpha_x * (evx - ev0);
}

// Evenly strided decreasing timesteps T = tau_K > ... > tau_1 >= 1.
inline std::vector<int> sample_timesteps(const NoiseSchedule& s, int n_steps) {
    n_steps = std::min(n_steps, s.t_steps);
    if (n_steps < 1) throw std::invalid_argument("sample: need at least one step");
    std::vector<int> ts(n_steps);
    for (int k = 0; k < n_steps; ++k) {
        double frac = n_steps == 1 ? 1.0 : 1.0 - static_cast<double>(k) / (n_steps - 1);
        ts[k] = std::max(1, static_cast<int>(std::lround(1 + frac * (s.t_steps - 1))));
    }
    for (size_t k = 1; k < ts.size(); ++k) ts[k] = std::min(ts[k], ts[k - 1] - 1);
    while (ts.size() > 1 && ts.back() < 1) ts.pop_back();
    return ts;
}

// Ancestral sampler generalized to a strided timestep subset: each update is
// the DDPM posterior between consecutive kept timesteps (via alpha_bar
// ratios). The final step returns the predicted clean latent directly.
inline Mat sample(const NoiseSchedule& s,
                  const std::function<Mat(const Mat& z_t, int t)>& eps_fn, Eigen::Index rows,
                  Eigen::Index cols, int n_steps, Rng& rng) {
    std::vector<int> ts = sample_timesteps(s, n_steps);
    Mat z = gaussian_like(rng, rows, cols);
    for (size_t k = 0; k < ts.size(); ++k) {
        int t = ts[k];
        double ab = s.alpha_bar[t];
        Mat eps = eps_fn(z, t);
        Mat x0 = (z - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
        if (k + 1 == ts.size()) return x0;
        double ab_prev = s.alpha_bar[ts[k + 1]];
        double ratio = ab / ab_prev;  // effective per-jump alpha
        double c0 = std::sqrt(ab_prev) * (1.0 - ratio) / (1.0 - ab);
        double cz = std::sqrt(ratio) * (1.0 - ab_prev) / (1.0 - ab);
        double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ratio);
        z = c0 * x0 + cz * z + std::sqrt(std::max(0.0, var)) * gaussian_like(rng, rows, cols);
    }
    return z;  // unreachable
}

}  // namespace mgie::diffusion
