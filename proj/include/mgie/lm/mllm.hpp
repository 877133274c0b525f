#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/core/image.hpp"
#include "mgie/lm/vocab.hpp"
#include "mgie/nn/transformer.hpp"

namespace mgie::lm {

struct LMConfig {
    int n_layers = 4;
    int n_heads = 4;
    int model_dim = 128;
    int max_len = 96;
    int n_img_tokens = 8;
    int mlp_mult = 4;
    // visual encoder
    int image_size = 32;
    int patch = 8;
    int enc_dim = 64;
    int enc_layers = 2;
    int enc_heads = 4;
    int max_text_len = 32;  // expressive-instruction cap in word tokens

    int patches_per_side() const { return image_size / patch; }
    int prefix_len() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return patch * patch * 3; }
};

inline const char* kPromptTemplate = "what will this image be like if";

struct LMOutput {
    Var logits = -1;       // (T_target, vocab): prediction rows for target tokens
    Var hidden = -1;       // (T_target, model_dim): post-final-norm states at target positions
    Var hidden_full = -1;  // (S, model_dim)
    int target_start = 0;  // sequence position of the first target token
};

// Visually-conditioned causal LM: patch encoder, adapter into the language
// width, causal transformer, LM head. [IMG] embeddings are ordinary rows of
// the token embedding table (the last N ids).
struct MLLM {
    LMConfig cfg;
    const Vocabulary* vocab = nullptr;

    nn::Linear patch_embed;
    Param* enc_pos = nullptr;
    std::vector<nn::Block> enc_blocks;
    nn::LayerNorm enc_ln;
    nn::Linear adapter;

    Param* tok_emb = nullptr;
    Param* pos_emb = nullptr;
    std::vector<nn::Block> blocks;
    nn::LayerNorm final_ln;
    nn::Linear head;

    void build(ParamStore& store, const Vocabulary& v, const LMConfig& c, Rng& rng) {
        cfg = c;
        vocab = &v;
        if (cfg.model_dim % cfg.n_heads != 0)
            throw std::invalid_argument("model_dim must be divisible by n_heads");
        if (cfg.n_img_tokens != v.n_img)
            throw std::invalid_argument("LMConfig.n_img_tokens must match vocabulary");
        patch_embed = nn::make_linear(store, "mllm.enc.patch_embed", cfg.patch_dim(), cfg.enc_dim, rng);
        enc_pos = &store.add("mllm.enc.pos", cfg.prefix_len(), cfg.enc_dim, 0.02, rng);
        for (int i = 0; i < cfg.enc_layers; ++i)
            enc_blocks.push_back(nn::make_block(store, "mllm.enc.block" + std::to_string(i),
                                                cfg.enc_dim, cfg.enc_heads, cfg.mlp_mult, rng));
        enc_ln = nn::make_layer_norm(store, "mllm.enc.final_ln", cfg.enc_dim);
        adapter = nn::make_linear(store, "mllm.adapter", cfg.enc_dim, cfg.model_dim, rng);

        tok_emb = &store.add("mllm.tok_emb", v.size(), cfg.model_dim, 0.02, rng);
        pos_emb = &store.add("mllm.pos_emb", cfg.max_len, cfg.model_dim, 0.02, rng);
        for (int i = 0; i < cfg.n_layers; ++i)
            blocks.push_back(nn::make_block(store, "mllm.block" + std::to_string(i),
                                            cfg.model_dim, cfg.n_heads, cfg.mlp_mult, rng));
        final_ln = nn::make_layer_norm(store, "mllm.final_ln", cfg.model_dim);
        head = nn::make_linear(store, "mllm.lm_head", cfg.model_dim, v.size(), rng);
    }

    Mat image_patches(const Image& im) const {
        if (im.h != cfg.image_size || im.w != cfg.image_size)
            throw std::invalid_argument("encode_image: image size mismatch with config");
        int pps = cfg.patches_per_side();
        Mat m(cfg.prefix_len(), cfg.patch_dim());
        for (int py = 0; py < pps; ++py)
            for (int px = 0; px < pps; ++px) {
                int row = py * pps + px;
                int col = 0;
                for (int y = 0; y < cfg.patch; ++y)
                    for (int x = 0; x < cfg.patch; ++x)
                        for (int c = 0; c < 3; ++c)
                            m(row, col++) = im.at(py * cfg.patch + y, px * cfg.patch + x, c);
            }
        return m;
    }

    // f = Enc_vis(V): P feature vectors.
    Var encode_image(Graph& g, const Image& im) const {
        Var x = nn::linear(g, g.constant(image_patches(im)), patch_embed);
        x = g.add(x, g.param(*enc_pos));
        for (const auto& b : enc_blocks) x = nn::block_forward(g, x, b, nullptr);
        return nn::layer_norm(g, x, enc_ln);
    }

    // W(f): projected visual prefix in the language width.
    Var project_adapter(Graph& g, Var f) const { return nn::linear(g, f, adapter); }

    std::vector<int> prompt_tokens(const std::string& instruction) const {
        std::vector<int> p = {Vocabulary::bos};
        for (int id : vocab->encode(kPromptTemplate)) p.push_back(id);
        for (int id : vocab->encode(instruction)) p.push_back(id);
        return p;
    }

    // Gold target for teacher forcing: expressive words + IMG_1..N + EOS.
    std::vector<int> gold_target(const std::string& expressive) const {
        std::vector<int> t = vocab->encode(expressive);
        for (int k = 0; k < vocab->n_img; ++k) t.push_back(vocab->img_id(k));
        t.push_back(Vocabulary::eos);
        return t;
    }

    // Causal transformer over [prefix || prompt || target]; prefix positions
    // are mutually visible, token positions are causal.
    LMOutput lm_forward(Graph& g, std::optional<Var> prefix, const std::vector<int>& prompt,
                        const std::vector<int>& target) const {
        int P = prefix ? static_cast<int>(g.rows(*prefix)) : 0;
        std::vector<int> tokens = prompt;
        tokens.insert(tokens.end(), target.begin(), target.end());
        int S = P + static_cast<int>(tokens.size());
        if (S > cfg.max_len) throw std::invalid_argument("lm_forward: sequence exceeds max_len");

        std::vector<int> tok_pos(tokens.size());
        for (size_t i = 0; i < tokens.size(); ++i) tok_pos[i] = P + static_cast<int>(i);
        Var tok = g.add(g.gather_rows(g.param(*tok_emb), tokens),
                        g.gather_rows(g.param(*pos_emb), tok_pos));
        Var x;
        if (P > 0) {
            std::vector<int> pre_pos(P);
            for (int i = 0; i < P; ++i) pre_pos[i] = i;
            Var pre = g.add(*prefix, g.gather_rows(g.param(*pos_emb), pre_pos));
            x = g.concat_rows(pre, tok);
        } else {
            x = tok;
        }
        Mat mask = nn::prefix_causal_mask(S, P);
        for (const auto& b : blocks) x = nn::block_forward(g, x, b, &mask);
        Var hidden_full = nn::layer_norm(g, x, final_ln);

        LMOutput out;
        out.hidden_full = hidden_full;
        out.target_start = P + static_cast<int>(prompt.size());
        if (!target.empty()) {
            int T = static_cast<int>(target.size());
            out.hidden = g.slice_rows(hidden_full, out.target_start, T);
            Var pred_rows = g.slice_rows(hidden_full, out.target_start - 1, T);
            out.logits = nn::linear(g, pred_rows, head);
        }
        return out;
    }

    // Eq. 2 cross entropy over non-PAD gold positions (IMG ids and EOS included).
    Var instruction_loss(Graph& g, const LMOutput& out, const std::vector<int>& gold) const {
        if (out.logits < 0 || g.rows(out.logits) != static_cast<Eigen::Index>(gold.size()))
            throw std::invalid_argument("instruction_loss: gold length mismatch");
        std::vector<uint8_t> mask(gold.size());
        for (size_t i = 0; i < gold.size(); ++i) mask[i] = gold[i] != Vocabulary::pad;
        return g.cross_entropy(out.logits, gold, mask);
    }

    // {e_[IMG] + h_[IMG]}: embedding rows plus hidden states at the [IMG]
    // positions of the target.
    Var extract_img_states(Graph& g, const LMOutput& out, const std::vector<int>& target) const {
        std::vector<int> offsets, ids;
        for (size_t i = 0; i < target.size(); ++i)
            if (vocab->is_img(target[i])) {
                offsets.push_back(static_cast<int>(i));
                ids.push_back(target[i]);
            }
        if (static_cast<int>(offsets.size()) != vocab->n_img)
            throw std::invalid_argument("extract_img_states: target must contain all IMG tokens");
        Var e = g.gather_rows(g.param(*tok_emb), ids);
        Var h = g.gather_rows(out.hidden, offsets);
        return g.add(e, h);
    }

    struct DecodeResult {
        std::vector<int> text_ids;  // expressive tokens, specials excluded
        Mat img_states;             // (N, model_dim) e+h at the forced IMG positions
        std::string text;
    };

    // Greedy decoding; text generation stops at EOS / first IMG / cap, then
    // IMG_1..N are force-appended and states extracted in one more pass.
    DecodeResult greedy_decode(const Image* image, const std::string& instruction) const {
        std::vector<int> prompt = prompt_tokens(instruction);
        std::vector<int> text;
        for (int step = 0; step < cfg.max_text_len; ++step) {
            Graph g;
            std::optional<Var> prefix;
            if (image) prefix = project_adapter(g, encode_image(g, *image));
            LMOutput out = lm_forward(g, prefix, prompt, text);
            Var last = g.slice_rows(out.hidden_full, g.rows(out.hidden_full) - 1, 1);
            Var logits = nn::linear(g, last, head);
            Eigen::Index best = 0;
            g.val(logits).row(0).maxCoeff(&best);
            int id = static_cast<int>(best);
            if (id == Vocabulary::eos || vocab->is_img(id)) break;
            text.push_back(id);
        }
        std::vector<int> target = text;
        for (int k = 0; k < vocab->n_img; ++k) target.push_back(vocab->img_id(k));
        Graph g;
        std::optional<Var> prefix;
        if (image) prefix = project_adapter(g, encode_image(g, *image));
        LMOutput out = lm_forward(g, prefix, prompt, target);
        Var states = extract_img_states(g, out, target);
        DecodeResult res;
        res.text_ids = text;
        res.img_states = g.val(states);
        res.text = vocab->decode(text);
        return res;
    }
};

}  // namespace mgie::lm
