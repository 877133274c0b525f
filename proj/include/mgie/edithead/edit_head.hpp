#pragma once

#include <string>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/nn/transformer.hpp"

namespace mgie::edithead {

struct EditHeadConfig {
    int n_layers = 4;
    int n_heads = 4;
    int guidance_dim = 64;   // d_u, must match the UNet cross-attention input
    int guidance_len = 8;    // L
    int input_dim = 128;     // MLLM model_dim
    int mlp_mult = 2;
};

// Sequence-to-sequence head mapping the N [IMG] states to the guidance
// sequence U. Continuous autoregression: step t consumes u_{t-1} (step 1 a
// learned start vector) and cross-attends to the [IMG] states.
struct EditHead {
    EditHeadConfig cfg;

    struct Layer {
        nn::LayerNorm ln1, lnc, ln2;
        nn::Attention self_attn, cross_attn;
        nn::Linear mlp1, mlp2;
    };

    Param* start = nullptr;    // (1, d_u), zero-initialized
    Param* pos = nullptr;      // (L, d_u) decoder positions
    Param* src_pos = nullptr;  // (N, input_dim) makes cross-attention position-aware
    std::vector<Layer> layers;
    nn::LayerNorm final_ln;
    nn::Linear out_proj;
    Param* null_seq = nullptr;  // learned null guidance (L, d_u)

    void build(ParamStore& store, const EditHeadConfig& c, int n_img_tokens, Rng& rng) {
        cfg = c;
        start = &store.add("edit_head.start", 1, cfg.guidance_dim, 0.0, rng);
        pos = &store.add("edit_head.pos", cfg.guidance_len, cfg.guidance_dim, 0.02, rng);
        src_pos = &store.add("edit_head.src_pos", n_img_tokens, cfg.input_dim, 0.02, rng);
        for (int i = 0; i < cfg.n_layers; ++i) {
            std::string p = "edit_head.layer" + std::to_string(i);
            Layer l;
            l.ln1 = nn::make_layer_norm(store, p + ".ln1", cfg.guidance_dim);
            l.self_attn = nn::make_attention(store, p + ".self_attn", cfg.guidance_dim,
                                             cfg.guidance_dim, cfg.n_heads, rng);
            l.lnc = nn::make_layer_norm(store, p + ".lnc", cfg.guidance_dim);
            l.cross_attn = nn::make_attention(store, p + ".cross_attn", cfg.guidance_dim,
                                              cfg.input_dim, cfg.n_heads, rng);
            l.ln2 = nn::make_layer_norm(store, p + ".ln2", cfg.guidance_dim);
            l.mlp1 = nn::make_linear(store, p + ".mlp.fc1", cfg.guidance_dim,
                                     cfg.guidance_dim * cfg.mlp_mult, rng);
            l.mlp2 = nn::make_linear(store, p + ".mlp.fc2", cfg.guidance_dim * cfg.mlp_mult,
                                     cfg.guidance_dim, rng);
            layers.push_back(l);
        }
        final_ln = nn::make_layer_norm(store, "edit_head.final_ln", cfg.guidance_dim);
        out_proj = nn::make_linear(store, "edit_head.out_proj", cfg.guidance_dim,
                                   cfg.guidance_dim, rng);
        null_seq = &store.add("edit_head.null", cfg.guidance_len, cfg.guidance_dim, 0.02, rng);
    }

    // One decoder pass over the current input sequence; returns per-position outputs.
    Var decode_once(Graph& g, Var seq, Var memory, const Mat& mask) const {
        Var x = seq;
        for (const auto& l : layers) {
            Var n1 = nn::layer_norm(g, x, l.ln1);
            x = g.add(x, nn::attention(g, n1, n1, l.self_attn, &mask));
            Var nc = nn::layer_norm(g, x, l.lnc);
            x = g.add(x, nn::attention(g, nc, memory, l.cross_attn, nullptr));
            Var n2 = nn::layer_norm(g, x, l.ln2);
            x = g.add(x, nn::linear(g, g.gelu(nn::linear(g, n2, l.mlp1)), l.mlp2));
        }
        return nn::linear(g, nn::layer_norm(g, x, final_ln), out_proj);
    }

    // U = T({u_1..u_{t-1}} | img_states), unrolled over the L steps.
    Var transform(Graph& g, Var img_states) const {
        if (g.rows(img_states) != g.val(g.param(*src_pos)).rows() ||
            g.cols(img_states) != cfg.input_dim)
            throw std::invalid_argument("edit head: img_states shape mismatch");
        Var memory = g.add(img_states, g.param(*src_pos));
        std::vector<Var> u_rows;
        for (int t = 0; t < cfg.guidance_len; ++t) {
            Var seq = g.param(*start);
            for (int k = 0; k < t; ++k) seq = g.concat_rows(seq, u_rows[k]);
            std::vector<int> pos_idx(t + 1);
            for (int k = 0; k <= t; ++k) pos_idx[k] = k;
            seq = g.add(seq, g.gather_rows(g.param(*pos), pos_idx));
            Mat mask = nn::causal_mask(t + 1);
            Var out = decode_once(g, seq, memory, mask);
            u_rows.push_back(g.slice_rows(out, t, 1));
        }
        Var u = u_rows[0];
        for (int t = 1; t < cfg.guidance_len; ++t) u = g.concat_rows(u, u_rows[t]);
        return u;
    }

    // Learned unconditional sequence for condition dropout and CFG.
    Var null_guidance(Graph& g) const { return g.param(*null_seq); }
    Mat null_guidance_value() const { return null_seq->value; }
};

}  // namespace mgie::edithead
