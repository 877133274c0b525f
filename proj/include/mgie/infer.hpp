#pragma once

#include <algorithm>
#include <string>

#include "mgie/diffusion/diffusion.hpp"
#include "mgie/model.hpp"

namespace mgie {

struct EditOptions {
    double alpha_v = 1.5;
    double alpha_x = 7.5;
    int sample_steps = 0;  // 0 = every schedule step
    uint64_t seed = 0;
    bool use_visual_prefix = true;  // false: language-only instruction derivation
    bool use_textcond = false;      // true: condition on the instruction text directly
    // Compose the output as input + decode(x0) - decode(encode(input)). The
    // autoencoder's reconstruction bias cancels on unedited content, so a
    // prediction that merely reproduces the input yields the input exactly.
    bool residual_decode = true;
};

struct EditResult {
    std::string expressive;
    Image edited;
    Mat guidance;  // (L, d_u)
};

// Full inference path: derive the expressive instruction and guidance, then
// run two-scale classifier-free-guided ancestral sampling in latent space
// and decode with the VAE.
inline EditResult run_edit(EditModel& m, const Image& input, const std::string& instruction,
                           const EditOptions& opt) {
    EditResult res;
    if (opt.use_textcond) {
        res.expressive = instruction;
        Graph g;
        res.guidance = g.val(m.textcond.transform(g, m.vocab.encode(instruction)));
    } else {
        auto dec = m.mllm.greedy_decode(opt.use_visual_prefix ? &input : nullptr, instruction);
        res.expressive = dec.text;
        Graph g;
        res.guidance = g.val(m.head.transform(g, g.constant(dec.img_states)));
    }
    Mat null_guidance = opt.use_textcond
                            ? m.textcond.null_seq->value
                            : m.head.null_guidance_value();
    Mat input_latent = m.vae.encode_value(input);
    Mat null_latent = m.null_image_latent();

    diffusion::CondScoreFn score = [&](const Mat& z_t, int t, bool img, bool guide) {
        Graph g;
        Var eps = m.unet.forward(g, g.constant(z_t), g.constant(img ? input_latent : null_latent),
                                 t, g.constant(guide ? res.guidance : null_guidance));
        return g.val(eps);
    };
    auto eps_fn = [&](const Mat& z_t, int t) {
        return diffusion::cfg_score(score, z_t, t, opt.alpha_v, opt.alpha_x);
    };
    int steps = opt.sample_steps > 0 ? opt.sample_steps : m.schedule.t_steps;
    Rng rng(mix_seed(0x65646974ull, opt.seed));
    Mat x0 = diffusion::sample(m.schedule, eps_fn, input_latent.rows(), input_latent.cols(),
                               steps, rng);
    res.edited = m.vae.decode(x0);
    if (opt.residual_decode) {
        Image input_recon = m.vae.decode(input_latent);
        for (size_t i = 0; i < res.edited.data.size(); ++i)
            res.edited.data[i] = std::clamp(
                input.data[i] + res.edited.data[i] - input_recon.data[i], 0.0, 1.0);
    }
    return res;
}

}  // namespace mgie
