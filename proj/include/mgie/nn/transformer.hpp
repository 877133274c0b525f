#pragma once

#include <string>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/core/param.hpp"
#include "mgie/core/rng.hpp"

namespace mgie::nn {

struct Linear {
    Param* w = nullptr;
    Param* b = nullptr;
};

inline Linear make_linear(ParamStore& store, const std::string& prefix, int in, int out,
                          Rng& rng, double scale = -1.0) {
    Linear l;
    if (scale < 0.0) scale = 1.0 / std::sqrt(static_cast<double>(in));
    l.w = &store.add(prefix + ".w", in, out, scale, rng);
    l.b = &store.add(prefix + ".b", 1, out, 0.0, rng);
    return l;
}

inline Var linear(Graph& g, Var x, const Linear& l) {
    return g.add_rowvec(g.matmul(x, g.param(*l.w)), g.param(*l.b));
}

struct LayerNorm {
    Param* gamma = nullptr;
    Param* beta = nullptr;
};

inline LayerNorm make_layer_norm(ParamStore& store, const std::string& prefix, int dim) {
    LayerNorm n;
    n.gamma = &store.add_const(prefix + ".gamma", Eigen::MatrixXd::Ones(1, dim));
    n.beta = &store.add_const(prefix + ".beta", Eigen::MatrixXd::Zero(1, dim));
    return n;
}

inline Var layer_norm(Graph& g, Var x, const LayerNorm& n) {
    return g.layer_norm(x, g.param(*n.gamma), g.param(*n.beta));
}

struct Attention {
    Linear q, k, v, o;
    int n_heads = 1;
    int dim = 0;  // query/output width; head_dim = dim / n_heads
};

inline Attention make_attention(ParamStore& store, const std::string& prefix, int dim,
                                int kv_in_dim, int n_heads, Rng& rng) {
    Attention a;
    a.n_heads = n_heads;
    a.dim = dim;
    a.q = make_linear(store, prefix + ".wq", dim, dim, rng);
    a.k = make_linear(store, prefix + ".wk", kv_in_dim, dim, rng);
    a.v = make_linear(store, prefix + ".wv", kv_in_dim, dim, rng);
    a.o = make_linear(store, prefix + ".wo", dim, dim, rng);
    return a;
}

// Multi-head attention; q_in rows are query positions, kv_in rows are
// key/value positions. mask, when given, is (Tq, Tk) additive (0 / -inf).
// If probs_out is non-null the per-head softmax nodes are recorded.
inline Var attention(Graph& g, Var q_in, Var kv_in, const Attention& a,
                     const Mat* mask = nullptr, std::vector<Var>* probs_out = nullptr) {
    Var q = linear(g, q_in, a.q);
    Var k = linear(g, kv_in, a.k);
    Var v = linear(g, kv_in, a.v);
    int hd = a.dim / a.n_heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    Var merged = -1;
    for (int h = 0; h < a.n_heads; ++h) {
        Var qh = g.slice_cols(q, h * hd, hd);
        Var kh = g.slice_cols(k, h * hd, hd);
        Var vh = g.slice_cols(v, h * hd, hd);
        Var scores = g.scale(g.matmul(qh, kh, false, true), inv_sqrt);
        if (mask) scores = g.add(scores, g.constant(*mask));
        Var probs = g.softmax_rows(scores);
        if (probs_out) probs_out->push_back(probs);
        Var oh = g.matmul(probs, vh);
        merged = (h == 0) ? oh : g.concat_cols(merged, oh);
    }
    return linear(g, merged, a.o);
}

struct Block {  // pre-LN self-attention transformer block
    LayerNorm ln1, ln2;
    Attention attn;
    Linear mlp1, mlp2;
};

inline Block make_block(ParamStore& store, const std::string& prefix, int dim, int n_heads,
                        int mlp_mult, Rng& rng) {
    Block b;
    b.ln1 = make_layer_norm(store, prefix + ".ln1", dim);
    b.attn = make_attention(store, prefix + ".attn", dim, dim, n_heads, rng);
    b.ln2 = make_layer_norm(store, prefix + ".ln2", dim);
    b.mlp1 = make_linear(store, prefix + ".mlp.fc1", dim, dim * mlp_mult, rng);
    b.mlp2 = make_linear(store, prefix + ".mlp.fc2", dim * mlp_mult, dim, rng);
    return b;
}

inline Var block_forward(Graph& g, Var x, const Block& b, const Mat* mask = nullptr) {
    Var n1 = layer_norm(g, x, b.ln1);
    Var h = attention(g, n1, n1, b.attn, mask);
    x = g.add(x, h);
    Var m = linear(g, g.gelu(linear(g, layer_norm(g, x, b.ln2), b.mlp1)), b.mlp2);
    return g.add(x, m);
}

// Causal mask where the first prefix_len positions are mutually visible and
// later positions attend causally (prefix included).
inline Mat prefix_causal_mask(int total, int prefix_len) {
    Mat m = Mat::Zero(total, total);
    const double neg = -1e30;
    for (int i = 0; i < total; ++i)
        for (int j = 0; j < total; ++j) {
            bool visible = (i < prefix_len && j < prefix_len) || (i >= prefix_len && j <= i);
            if (!visible) m(i, j) = neg;
        }
    return m;
}

inline Mat causal_mask(int total) { return prefix_causal_mask(total, 0); }

// Sinusoidal embedding for a scalar timestep, 1 x dim.
inline Mat sinusoidal_embedding(double t, int dim) {
    Mat e(1, dim);
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        e(0, i) = std::sin(t * freq);
        e(0, half + i) = std::cos(t * freq);
    }
    for (int i = 2 * half; i < dim; ++i) e(0, i) = 0.0;
    return e;
}

}  // namespace mgie::nn
