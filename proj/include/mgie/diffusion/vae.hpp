#pragma once

#include <string>
#include <vector>

#include "mgie/core/graph.hpp"
#include "mgie/core/image.hpp"
#include "mgie/nn/transformer.hpp"

namespace mgie::diffusion {

struct VAEConfig {
    int image_size = 32;
    int latent_channels = 4;
    int base = 16;   // first conv width
    int mid = 32;    // stride-2 stage width

    int latent_side() const { return image_size / 4; }
};

// Small convolutional VAE; encode returns the posterior mean (no sampling at
// use time). Latents are divided by a stored scale so the diffusion model
// sees roughly unit-variance inputs.
struct VAE {
    VAEConfig cfg;
    nn::Linear e1, e2, e3, e4;  // conv weights as (k*k*Cin, Cout)
    nn::Linear d1, d2, d3, d4;
    Param* latent_scale = nullptr;  // (1,1)

    void build(ParamStore& store, const VAEConfig& c, Rng& rng) {
        cfg = c;
        auto conv = [&](const std::string& name, int cin, int cout) {
            return nn::make_linear(store, name, 9 * cin, cout, rng);
        };
        e1 = conv("vae.enc.conv1", 3, cfg.base);
        e2 = conv("vae.enc.conv2", cfg.base, cfg.mid);
        e3 = conv("vae.enc.conv3", cfg.mid, cfg.mid);
        e4 = conv("vae.enc.conv4", cfg.mid, 2 * cfg.latent_channels);
        d1 = conv("vae.dec.conv1", cfg.latent_channels, cfg.mid);
        d2 = conv("vae.dec.conv2", cfg.mid, cfg.mid);
        d3 = conv("vae.dec.conv3", cfg.mid, cfg.base);
        d4 = conv("vae.dec.conv4", cfg.base, 3);
        latent_scale = &store.add_const("vae.latent_scale", Mat::Ones(1, 1));
    }

    Var conv3x3(Graph& g, Var x, const nn::Linear& w, int side, int stride) const {
        return nn::linear(g, g.im2col(x, side, side, 3, stride, 1), w);
    }

    static std::vector<int> upsample2x_indices(int side) {
        std::vector<int> idx;
        idx.reserve(static_cast<size_t>(side) * side * 4);
        for (int y = 0; y < 2 * side; ++y)
            for (int x = 0; x < 2 * side; ++x) idx.push_back((y / 2) * side + x / 2);
        return idx;
    }

    // Returns {mean, logvar}, each (latent_side^2, latent_channels). The mean
    // is unscaled (raw network output).
    std::pair<Var, Var> encode_raw(Graph& g, const Image& im) const {
        Mat px = im.to_matrix() * 2.0 - Mat::Ones(static_cast<Eigen::Index>(im.h) * im.w, 3);
        int s = cfg.image_size;
        Var x = g.silu(conv3x3(g, g.constant(px), e1, s, 1));
        x = g.silu(conv3x3(g, x, e2, s, 2));
        x = g.silu(conv3x3(g, x, e3, s / 2, 2));
        x = conv3x3(g, x, e4, s / 4, 1);
        Var mean = g.slice_cols(x, 0, cfg.latent_channels);
        Var logvar = g.slice_cols(x, cfg.latent_channels, cfg.latent_channels);
        return {mean, logvar};
    }

    // Deterministic scaled latent used everywhere downstream.
    Var encode(Graph& g, const Image& im) const {
        auto [mean, logvar] = encode_raw(g, im);
        (void)logvar;
        return g.scale(mean, 1.0 / latent_scale->value(0, 0));
    }

    Mat encode_value(const Image& im) const {
        Graph g;
        return g.val(encode(g, im));
    }

    // latent is in scaled space; output rows are pixels, values in [-1, 1] land.
    Var decode_raw(Graph& g, Var latent) const {
        int ls = cfg.latent_side();
        Var x = g.scale(latent, latent_scale->value(0, 0));
        x = g.silu(conv3x3(g, x, d1, ls, 1));
        x = g.gather_rows(x, upsample2x_indices(ls));
        x = g.silu(conv3x3(g, x, d2, 2 * ls, 1));
        x = g.gather_rows(x, upsample2x_indices(2 * ls));
        x = g.silu(conv3x3(g, x, d3, 4 * ls, 1));
        return conv3x3(g, x, d4, 4 * ls, 1);
    }

    Image decode(const Mat& latent) const {
        Graph g;
        Mat y = g.val(decode_raw(g, g.constant(latent)));
        Mat rgb = 0.5 * (y + Mat::Ones(y.rows(), y.cols()));
        Image im = Image::from_matrix(rgb, cfg.image_size, cfg.image_size);
        im.clip01();
        return im;
    }
};

}  // namespace mgie::diffusion
