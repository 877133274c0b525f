#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgie/core/optim.hpp"
#include "mgie/datagen/dataset.hpp"
#include "mgie/diffusion/diffusion.hpp"
#include "mgie/model.hpp"

namespace mgie::trainer {

enum class TrainMode { E2E, LGIE, FZ, FT };

inline TrainMode mode_from_string(const std::string& s) {
    if (s == "E2E") return TrainMode::E2E;
    if (s == "LGIE") return TrainMode::LGIE;
    if (s == "FZ") return TrainMode::FZ;
    if (s == "FT") return TrainMode::FT;
    throw std::invalid_argument("unknown training mode: " + s);
}

inline std::string mode_to_string(TrainMode m) {
    switch (m) {
        case TrainMode::E2E: return "E2E";
        case TrainMode::LGIE: return "LGIE";
        case TrainMode::FZ: return "FZ";
        case TrainMode::FT: return "FT";
    }
    return "?";
}

struct DropoutRates {
    double image_only = 0.05;
    double guidance_only = 0.05;
    double both = 0.05;

    void validate() const {
        for (double r : {image_only, guidance_only, both})
            if (r < 0.0 || r > 1.0) throw std::invalid_argument("dropout rate out of [0,1]");
        if (image_only + guidance_only + both >= 1.0)
            throw std::invalid_argument("dropout rates must sum to < 1");
    }
};

// Parameter-name patterns marked frozen, minus exceptions. Presets:
//   none            - everything trains
//   self_attn       - language-model self-attention blocks frozen
//   embed_head_only - whole language model frozen except the word embedding
//                     table, the LM head, and the visual adapter
struct FreezeMask {
    std::vector<std::string> freeze;
    std::vector<std::string> except;

    bool is_frozen(const std::string& name) const {
        for (const auto& e : except)
            if (pattern_match(e, name)) return false;
        for (const auto& f : freeze)
            if (pattern_match(f, name)) return true;
        return false;
    }

    static FreezeMask preset(const std::string& name) {
        FreezeMask m;
        if (name == "none") return m;
        if (name == "self_attn") {
            m.freeze = {"mllm.block*.attn.*", "mllm.enc.block*.attn.*"};
            return m;
        }
        if (name == "embed_head_only") {
            m.freeze = {"mllm.*"};
            m.except = {"mllm.tok_emb", "mllm.lm_head.*", "mllm.adapter.*"};
            return m;
        }
        throw std::invalid_argument("unknown freeze preset: " + name);
    }
};

struct TrainConfig {
    TrainMode mode = TrainMode::E2E;
    int batch_size = 16;
    int steps = 2000;
    double lr_mllm = 5e-4;
    double lr_diffusion = 1e-4;
    double edit_loss_weight = 0.5;
    DropoutRates dropout;
    std::string freeze_preset = "self_attn";
    uint64_t seed = 0;
    int ckpt_every = 0;  // 0 = final checkpoint only

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (steps < 1) throw std::invalid_argument("steps must be >= 1");
        if (lr_mllm <= 0.0 || lr_diffusion <= 0.0 || edit_loss_weight <= 0.0)
            throw std::invalid_argument("learning rates and loss weight must be positive");
        dropout.validate();
        FreezeMask::preset(freeze_preset);
    }
};

struct StepStats {
    double l_ins = 0.0, l_edit = 0.0, l_all = 0.0, grad_norm = 0.0;
};

struct DropCounters {
    long image_only = 0, guidance_only = 0, both = 0, none = 0;
    long total() const { return image_only + guidance_only + both + none; }
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// In-memory training example: input image (for the visual prefix) plus the
// frozen-VAE latents of both sides.
struct PreparedExample {
    Image input_image;
    Mat input_latent, goal_latent;
    std::string instruction, expressive;
};

class Trainer {
public:
    EditModel& model;
    TrainConfig cfg;
    AdamW opt;
    DropCounters drops;

    Trainer(EditModel& m, const TrainConfig& c) : model(m), cfg(c) {
        cfg.validate();
        setup_optimizer();
        // Cumulative weights for noise-level importance sampling; w_t is the
        // noise-to-signal ratio (1-abar)/abar.
        t_cumw_.resize(static_cast<size_t>(model.schedule.t_steps) + 1, 0.0);
        for (int t = 1; t <= model.schedule.t_steps; ++t) {
            double ab = model.schedule.alpha_bar[t];
            t_cumw_[static_cast<size_t>(t)] = t_cumw_[static_cast<size_t>(t) - 1] + (1.0 - ab) / ab;
        }
    }

    // Noise-level curriculum: half the draws are uniform, half weighted by the
    // noise-to-signal ratio. Under the epsilon regression an error in the
    // implied denoised estimate is attenuated by sqrt(abar/(1-abar)), so a
    // uniform schedule starves exactly the high-noise steps that position the
    // sampling trajectory; the weighted half restores their gradient share.
    int sample_timestep(Rng& rng) {
        if (rng.uniform() < 0.5)
            return static_cast<int>(rng.randint(1, model.schedule.t_steps));
        double u = rng.uniform() * t_cumw_.back();
        auto it = std::upper_bound(t_cumw_.begin(), t_cumw_.end(), u);
        int t = static_cast<int>(it - t_cumw_.begin());
        return std::clamp(t, 1, model.schedule.t_steps);
    }

    // Group assignment: language side (MLLM + adapter + edit head) at
    // lr_mllm; diffusion side (UNet + the FZ/FT text pathway) at
    // lr_diffusion; VAE always frozen. Mode overrides, then the freeze mask.
    void setup_optimizer() {
        FreezeMask mask = FreezeMask::preset(cfg.freeze_preset);
        for (auto& pp : model.store) {
            Param& p = *pp;
            const std::string& n = p.name;
            bool lang = n.rfind("mllm.", 0) == 0 || n.rfind("edit_head.", 0) == 0;
            bool diff = n.rfind("unet.", 0) == 0 || n.rfind("textcond.", 0) == 0;
            if (n.rfind("vae.", 0) == 0 || n.rfind("test.", 0) == 0) {
                opt.freeze(p);
                continue;
            }
            if (lang) opt.set_lr(p, cfg.lr_mllm);
            else if (diff) opt.set_lr(p, cfg.lr_diffusion);
            else continue;

            bool frozen = false;
            switch (cfg.mode) {
                case TrainMode::E2E:
                case TrainMode::LGIE:
                    // text pathway unused; keep it untouched
                    frozen = n.rfind("textcond.", 0) == 0 || mask.is_frozen(n);
                    break;
                case TrainMode::FZ:
                    frozen = true;
                    break;
                case TrainMode::FT:
                    frozen = !diff;
                    break;
            }
            if (frozen) opt.freeze(p);
        }
    }

    PreparedExample prepare(const datagen::Triple& t) const {
        PreparedExample e;
        e.input_image = t.input_image;
        e.input_latent = model.vae.encode_value(t.input_image);
        e.goal_latent = model.vae.encode_value(t.goal_image);
        e.instruction = t.instruction;
        e.expressive = t.expressive;
        return e;
    }

    // 0 = keep both, 1 = image nulled, 2 = guidance nulled, 3 = both nulled.
    int sample_drop_case(Rng& rng) {
        double u = rng.uniform();
        int c;
        if (u < cfg.dropout.image_only) c = 1;
        else if (u < cfg.dropout.image_only + cfg.dropout.guidance_only) c = 2;
        else if (u < cfg.dropout.image_only + cfg.dropout.guidance_only + cfg.dropout.both)
            c = 3;
        else c = 0;
        (c == 0 ? drops.none
         : c == 1 ? drops.image_only
         : c == 2 ? drops.guidance_only
                  : drops.both)++;
        return c;
    }

    // One joint optimization step over the batch. All examples share one
    // graph so L_edit gradient reaches the language side through the [IMG]
    // states in E2E/LGIE mode.
    StepStats training_step(const std::vector<const PreparedExample*>& batch, Rng& rng) {
        bool uses_mllm = cfg.mode == TrainMode::E2E || cfg.mode == TrainMode::LGIE;
        Graph g;
        Var l_ins_sum = -1, l_edit_sum = -1;
        for (const PreparedExample* ex : batch) {
            Var guidance;
            Var l_ins_i = -1;
            if (uses_mllm) {
                auto prompt = model.mllm.prompt_tokens(ex->instruction);
                auto target = model.mllm.gold_target(ex->expressive);
                std::optional<Var> prefix;
                if (cfg.mode == TrainMode::E2E)
                    prefix = model.mllm.project_adapter(
                        g, model.mllm.encode_image(g, ex->input_image));
                auto out = model.mllm.lm_forward(g, prefix, prompt, target);
                l_ins_i = model.mllm.instruction_loss(g, out, target);
                Var img_states = model.mllm.extract_img_states(g, out, target);
                guidance = model.head.transform(g, img_states);
            } else {
                guidance = model.textcond.transform(g, model.vocab.encode(ex->expressive));
            }

            int drop = sample_drop_case(rng);
            Var v_lat = (drop == 1 || drop == 3) ? g.constant(model.null_image_latent())
                                                 : g.constant(ex->input_latent);
            if (drop == 2 || drop == 3)
                guidance = uses_mllm ? model.head.null_guidance(g)
                                     : model.textcond.null_guidance(g);

            int t = sample_timestep(rng);
            Mat eps = diffusion::gaussian_like(rng, ex->goal_latent.rows(),
                                               ex->goal_latent.cols());
            Mat z_t = diffusion::forward_noise(model.schedule, ex->goal_latent, t, eps);
            Var eps_hat = model.unet.forward(g, g.constant(z_t), v_lat, t, guidance);
            Var l_edit_i = g.mse(eps_hat, g.constant(eps));

            l_edit_sum = l_edit_sum < 0 ? l_edit_i : g.add(l_edit_sum, l_edit_i);
            if (l_ins_i >= 0) l_ins_sum = l_ins_sum < 0 ? l_ins_i : g.add(l_ins_sum, l_ins_i);
        }
        double inv_b = 1.0 / static_cast<double>(batch.size());
        Var l_edit = g.scale(l_edit_sum, inv_b);
        Var loss;
        StepStats s;
        s.l_edit = g.val(l_edit)(0, 0);
        if (l_ins_sum >= 0) {
            Var l_ins = g.scale(l_ins_sum, inv_b);
            s.l_ins = g.val(l_ins)(0, 0);
            loss = g.add(l_ins, g.scale(l_edit, cfg.edit_loss_weight));
        } else {
            loss = g.scale(l_edit, cfg.edit_loss_weight);
        }
        s.l_all = s.l_ins + cfg.edit_loss_weight * s.l_edit;
        g.backward(loss);

        std::unordered_map<int, Mat> grads;
        double sq = 0.0;
        for (const auto& [p, v] : g.params_used()) {
            if (!opt.is_trainable(*p)) continue;
            Mat grad = g.param_grad(*p);
            sq += grad.squaredNorm();
            grads.emplace(p->id, std::move(grad));
        }
        s.grad_norm = std::sqrt(sq);
        if (!std::isfinite(s.l_all) || !std::isfinite(s.grad_norm))
            throw TrainingDiverged("non-finite training signal: L_ins=" +
                                   std::to_string(s.l_ins) + " L_edit=" +
                                   std::to_string(s.l_edit) + " grad_norm=" +
                                   std::to_string(s.grad_norm));
        opt.step(model.store, grads);
        return s;
    }

    // Full loop: deterministic batch selection, per-step CSV log, periodic
    // and final checkpoints under out_dir.
    std::vector<StepStats> train(const std::vector<PreparedExample>& train_set,
                                 const std::string& out_dir,
                                 const std::string& csv_name = "loss.csv") {
        if (train_set.empty()) throw std::invalid_argument("train: empty training set");
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / csv_name);
        if (!csv) throw std::runtime_error("cannot write loss log in " + out_dir);
        csv << "step,L_ins,L_edit,L_all,grad_norm,lr_mllm,lr_diffusion\n";
        std::vector<StepStats> history;
        history.reserve(cfg.steps);
        for (int step = 0; step < cfg.steps; ++step) {
            Rng rng(mix_seed(cfg.seed, 0x747261696eull + static_cast<uint64_t>(step)));
            std::vector<const PreparedExample*> batch;
            for (int b = 0; b < cfg.batch_size; ++b)
                batch.push_back(&train_set[static_cast<size_t>(
                    rng.randint(0, static_cast<int>(train_set.size()) - 1))]);
            StepStats s;
            try {
                s = training_step(batch, rng);
            } catch (const TrainingDiverged& e) {
                throw TrainingDiverged(std::string(e.what()) + " at step " +
                                       std::to_string(step));
            }
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.3g,%.3g\n", step,
                          s.l_ins, s.l_edit, s.l_all, s.grad_norm, cfg.lr_mllm,
                          cfg.lr_diffusion);
            csv << line;
            history.push_back(s);
            if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0 &&
                step + 1 < cfg.steps) {
                char name[64];
                std::snprintf(name, sizeof(name), "ckpt_%06d.bin", step + 1);
                model.save((fs::path(out_dir) / name).string());
            }
        }
        model.save((fs::path(out_dir) / "model.ckpt").string());
        return history;
    }

private:
    std::vector<double> t_cumw_;  // index 0 unused
};

// Standalone VAE pretraining: reconstruction + lightly weighted KL, then the
// latent scale is calibrated so encoded training latents have unit variance.
struct VAEPretrainConfig {
    int steps = 2000;
    double lr = 1e-3;
    double kl_weight = 1e-6;
    uint64_t seed = 0;
};

inline double pretrain_vae(EditModel& model, const std::vector<datagen::Triple>& triples,
                           const VAEPretrainConfig& c, const std::string& ckpt_path) {
    if (triples.empty()) throw std::invalid_argument("pretrain_vae: no data");
    AdamW opt;
    for (auto& pp : model.store)
        if (pp->name.rfind("vae.", 0) == 0 && pp->name != "vae.latent_scale")
            opt.set_lr(*pp, c.lr);

    double last_loss = 0.0;
    for (int step = 0; step < c.steps; ++step) {
        Rng rng(mix_seed(c.seed, 0x766165ull + static_cast<uint64_t>(step)));
        const datagen::Triple& t = triples[static_cast<size_t>(
            rng.randint(0, static_cast<int>(triples.size()) - 1))];
        const Image& im = rng.uniform() < 0.5 ? t.input_image : t.goal_image;

        Graph g;
        auto [mean, logvar] = model.vae.encode_raw(g, im);
        Mat eps = diffusion::gaussian_like(rng, model.vae.cfg.latent_side() *
                                                    model.vae.cfg.latent_side(),
                                           model.vae.cfg.latent_channels);
        Var z = g.add(mean, g.mul(g.exp_op(g.scale(logvar, 0.5)), g.constant(eps)));
        Mat px = im.to_matrix() * 2.0 -
                 Mat::Ones(static_cast<Eigen::Index>(im.h) * im.w, 3);
        Var recon = g.mse(model.vae.decode_raw(g, z), g.constant(px));
        // KL(q || N(0,1)) summed over latent entries
        Var kl = g.scale(
            g.sum(g.sub(g.add(g.mul(mean, mean), g.exp_op(logvar)),
                        g.add(logvar, g.constant(Mat::Ones(g.rows(logvar), g.cols(logvar)))))),
            0.5);
        Var loss = g.add(recon, g.scale(kl, c.kl_weight));
        last_loss = g.val(loss)(0, 0);
        if (!std::isfinite(last_loss))
            throw TrainingDiverged("vae pretraining diverged at step " + std::to_string(step));
        g.backward(loss);
        std::unordered_map<int, Mat> grads;
        for (const auto& [p, v] : g.params_used())
            if (opt.is_trainable(*p)) grads.emplace(p->id, g.param_grad(*p));
        opt.step(model.store, grads);
    }

    // calibrate the latent scale on a sample of raw posterior means
    model.vae.latent_scale->value(0, 0) = 1.0;
    double sq = 0.0;
    long n = 0;
    int sample = std::min<int>(64, static_cast<int>(triples.size()));
    for (int i = 0; i < sample; ++i) {
        Mat z = model.vae.encode_value(triples[i].input_image);
        sq += z.squaredNorm();
        n += z.size();
    }
    double sd = std::sqrt(sq / static_cast<double>(n));
    model.vae.latent_scale->value(0, 0) = sd > 1e-8 ? sd : 1.0;

    if (!ckpt_path.empty())
        save_checkpoint(ckpt_path, model.store, model.cfg.hash(), "vae.");
    return last_loss;
}

}  // namespace mgie::trainer
