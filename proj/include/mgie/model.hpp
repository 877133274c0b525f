#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/core/param.hpp"
#include "mgie/core/rng.hpp"
#include "mgie/diffusion/diffusion.hpp"
#include "mgie/diffusion/schedule.hpp"
#include "mgie/diffusion/unet.hpp"
#include "mgie/diffusion/vae.hpp"
#include "mgie/edithead/edit_head.hpp"
#include "mgie/lm/mllm.hpp"
#include "mgie/lm/vocab.hpp"

namespace mgie {

// Alternative conditioning used by the frozen / diffusion-only ablations:
// expressive-instruction tokens are embedded and pooled into the guidance
// sequence by a bank of learned queries. Entirely separate parameters from
// the edit head, so the two pathways never share weights.
struct TextCond {
    int guidance_dim = 64;
    int guidance_len = 8;

    Param* tok_emb = nullptr;  // (vocab, d_u)
    Param* pos = nullptr;      // (max_text_len, d_u)
    Param* query = nullptr;    // (L, d_u)
    nn::Attention attn;
    nn::LayerNorm ln;
    nn::Linear out;
    Param* null_seq = nullptr;  // (L, d_u)

    void build(ParamStore& store, int vocab_size, int max_text_len, int d_u, int len,
               int n_heads, Rng& rng) {
        guidance_dim = d_u;
        guidance_len = len;
        tok_emb = &store.add("textcond.tok_emb", vocab_size, d_u, 0.02, rng);
        pos = &store.add("textcond.pos", max_text_len, d_u, 0.02, rng);
        query = &store.add("textcond.query", len, d_u, 0.02, rng);
        attn = nn::make_attention(store, "textcond.attn", d_u, d_u, n_heads, rng);
        ln = nn::make_layer_norm(store, "textcond.ln", d_u);
        out = nn::make_linear(store, "textcond.out", d_u, d_u, rng);
        null_seq = &store.add("textcond.null", len, d_u, 0.02, rng);
    }

    Var transform(Graph& g, const std::vector<int>& token_ids) const {
        if (token_ids.empty()) return g.param(*null_seq);
        int n = std::min<int>(static_cast<int>(token_ids.size()),
                              static_cast<int>(pos->value.rows()));
        std::vector<int> ids(token_ids.begin(), token_ids.begin() + n);
        std::vector<int> pidx(n);
        for (int i = 0; i < n; ++i) pidx[i] = i;
        Var mem = g.add(g.gather_rows(g.param(*tok_emb), ids),
                        g.gather_rows(g.param(*pos), pidx));
        Var q = g.param(*query);
        Var x = g.add(q, nn::attention(g, q, mem, attn, nullptr));
        return nn::linear(g, nn::layer_norm(g, x, ln), out);
    }

    Var null_guidance(Graph& g) const { return g.param(*null_seq); }
};

struct ModelConfig {
    lm::LMConfig lm;
    edithead::EditHeadConfig edit;
    diffusion::VAEConfig vae;
    diffusion::UNetConfig unet;
    int t_steps = 100;
    double beta_start = 1e-3;
    double beta_end = 0.06;
    int seed = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["lm"] = {{"n_layers", lm.n_layers},   {"n_heads", lm.n_heads},
                   {"model_dim", lm.model_dim}, {"max_len", lm.max_len},
                   {"n_img_tokens", lm.n_img_tokens}, {"mlp_mult", lm.mlp_mult},
                   {"image_size", lm.image_size}, {"patch", lm.patch},
                   {"enc_dim", lm.enc_dim},     {"enc_layers", lm.enc_layers},
                   {"enc_heads", lm.enc_heads}, {"max_text_len", lm.max_text_len}};
        j["edit"] = {{"n_layers", edit.n_layers}, {"n_heads", edit.n_heads},
                     {"guidance_dim", edit.guidance_dim}, {"guidance_len", edit.guidance_len},
                     {"input_dim", edit.input_dim}, {"mlp_mult", edit.mlp_mult}};
        j["vae"] = {{"image_size", vae.image_size}, {"latent_channels", vae.latent_channels},
                    {"base", vae.base}, {"mid", vae.mid}};
        j["unet"] = {{"latent_side", unet.latent_side},
                     {"latent_channels", unet.latent_channels}, {"base", unet.base},
                     {"guidance_dim", unet.guidance_dim}, {"n_heads", unet.n_heads},
                     {"t_emb_dim", unet.t_emb_dim}, {"t_hidden", unet.t_hidden}};
        j["schedule"] = {{"t_steps", t_steps}, {"beta_start", beta_start},
                         {"beta_end", beta_end}};
        j["seed"] = seed;
        return j;
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        auto get = [](const nlohmann::json& o, const char* k, auto& v) {
            if (o.contains(k)) v = o.at(k).get<std::decay_t<decltype(v)>>();
        };
        if (j.contains("lm")) {
            const auto& o = j["lm"];
            get(o, "n_layers", c.lm.n_layers); get(o, "n_heads", c.lm.n_heads);
            get(o, "model_dim", c.lm.model_dim); get(o, "max_len", c.lm.max_len);
            get(o, "n_img_tokens", c.lm.n_img_tokens); get(o, "mlp_mult", c.lm.mlp_mult);
            get(o, "image_size", c.lm.image_size); get(o, "patch", c.lm.patch);
            get(o, "enc_dim", c.lm.enc_dim); get(o, "enc_layers", c.lm.enc_layers);
            get(o, "enc_heads", c.lm.enc_heads); get(o, "max_text_len", c.lm.max_text_len);
        }
        if (j.contains("edit")) {
            const auto& o = j["edit"];
            get(o, "n_layers", c.edit.n_layers); get(o, "n_heads", c.edit.n_heads);
            get(o, "guidance_dim", c.edit.guidance_dim);
            get(o, "guidance_len", c.edit.guidance_len);
            get(o, "input_dim", c.edit.input_dim); get(o, "mlp_mult", c.edit.mlp_mult);
        }
        if (j.contains("vae")) {
            const auto& o = j["vae"];
            get(o, "image_size", c.vae.image_size);
            get(o, "latent_channels", c.vae.latent_channels);
            get(o, "base", c.vae.base); get(o, "mid", c.vae.mid);
        }
        if (j.contains("unet")) {
            const auto& o = j["unet"];
            get(o, "latent_side", c.unet.latent_side);
            get(o, "latent_channels", c.unet.latent_channels);
            get(o, "base", c.unet.base); get(o, "guidance_dim", c.unet.guidance_dim);
            get(o, "n_heads", c.unet.n_heads); get(o, "t_emb_dim", c.unet.t_emb_dim);
            get(o, "t_hidden", c.unet.t_hidden);
        }
        if (j.contains("schedule")) {
            const auto& o = j["schedule"];
            get(o, "t_steps", c.t_steps); get(o, "beta_start", c.beta_start);
            get(o, "beta_end", c.beta_end);
        }
        get(j, "seed", c.seed);
        return c;
    }

    uint64_t hash() const {  // FNV-1a over the canonical serialization
        std::string s = to_json().dump();
        uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        return h;
    }

    void validate() const {
        if (edit.input_dim != lm.model_dim)
            throw std::invalid_argument("edit head input width must match the LM width");
        if (edit.guidance_dim != unet.guidance_dim)
            throw std::invalid_argument("edit head and UNet guidance widths differ");
        if (vae.latent_channels != unet.latent_channels)
            throw std::invalid_argument("VAE and UNet latent channel counts differ");
        if (vae.latent_side() != unet.latent_side)
            throw std::invalid_argument("VAE latent side must match UNet latent side");
        if (vae.image_size != lm.image_size)
            throw std::invalid_argument("VAE and LM image sizes differ");
    }
};

// Full editing model: MLLM + edit head + text-conditioning pathway + VAE +
// UNet, all in one parameter store so joint training sees a single graph.
struct EditModel {
    ModelConfig cfg;
    lm::Vocabulary vocab;
    ParamStore store;
    lm::MLLM mllm;
    edithead::EditHead head;
    TextCond textcond;
    diffusion::VAE vae;
    diffusion::UNet unet;
    diffusion::NoiseSchedule schedule{100};

    void build(const ModelConfig& c) {
        cfg = c;
        cfg.validate();
        vocab = lm::Vocabulary::build(cfg.lm.n_img_tokens);
        Rng rng(mix_seed(0x6d6f64656cull, static_cast<uint64_t>(cfg.seed)));
        mllm.build(store, vocab, cfg.lm, rng);
        head.build(store, cfg.edit, cfg.lm.n_img_tokens, rng);
        textcond.build(store, vocab.size(), cfg.lm.max_text_len, cfg.edit.guidance_dim,
                       cfg.edit.guidance_len, cfg.edit.n_heads, rng);
        vae.build(store, cfg.vae, rng);
        unet.build(store, cfg.unet, rng);
        schedule = diffusion::NoiseSchedule(cfg.t_steps, cfg.beta_start, cfg.beta_end);
        unet.sched = schedule;
    }

    // Null latent used when the image condition is dropped for CFG.
    Mat null_image_latent() const {
        int s = cfg.unet.latent_side;
        return Mat::Zero(static_cast<Eigen::Index>(s) * s, cfg.unet.latent_channels);
    }

    void save(const std::string& path) { save_checkpoint(path, store, cfg.hash()); }

    // Fails when the checkpoint was written under a different configuration.
    void load(const std::string& path) {
        uint64_t h = load_checkpoint(path, store, false);
        if (h != cfg.hash())
            throw std::runtime_error("checkpoint configuration hash mismatch");
    }
};

}  // namespace mgie
