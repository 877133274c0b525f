#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "mgie/trainer/trainer.hpp"
#include "tiny_model.hpp"

using namespace mgie;
using namespace mgie::trainer;

namespace {

std::vector<datagen::Triple> tiny_data(int n) {
    std::vector<datagen::Triple> out;
    for (int i = 0; i < n; ++i) out.push_back(datagen::make_triple(99, i, 16));
    return out;
}

std::map<std::string, Mat> snapshot(EditModel& m) {
    std::map<std::string, Mat> s;
    for (auto& p : m.store) s[p->name] = p->value;
    return s;
}

// Names of parameters whose values changed since the snapshot.
std::vector<std::string> changed_params(EditModel& m, const std::map<std::string, Mat>& snap) {
    std::vector<std::string> out;
    for (auto& p : m.store) {
        const Mat& before = snap.at(p->name);
        if (before.rows() != p->value.rows() || before.cols() != p->value.cols() ||
            (before - p->value).cwiseAbs().maxCoeff() != 0.0)
            out.push_back(p->name);
    }
    return out;
}

bool any_with_prefix(const std::vector<std::string>& names, const std::string& prefix) {
    for (const auto& n : names)
        if (n.rfind(prefix, 0) == 0) return true;
    return false;
}

void run_steps(EditModel& model, TrainConfig cfg, const std::vector<datagen::Triple>& data,
               int steps) {
    Trainer tr(model, cfg);
    std::vector<PreparedExample> prep;
    for (const auto& t : data) prep.push_back(tr.prepare(t));
    for (int s = 0; s < steps; ++s) {
        Rng rng(mix_seed(7, static_cast<uint64_t>(s)));
        std::vector<const PreparedExample*> batch = {&prep[s % prep.size()],
                                                     &prep[(s + 1) % prep.size()]};
        tr.training_step(batch, rng);
    }
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig c;
    REQUIRE_NOTHROW(c.validate());
    c.batch_size = 0;
    REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.dropout.image_only = 0.5;
    c.dropout.guidance_only = 0.4;
    c.dropout.both = 0.2;
    REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.freeze_preset = "bogus";
    REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("mode isolation: which parameter groups move") {
    auto data = tiny_data(4);

    SECTION("FZ changes nothing") {
        EditModel m;
        m.build(testutil::tiny_model_cfg());
        auto snap = snapshot(m);
        TrainConfig c;
        c.mode = TrainMode::FZ;
        c.freeze_preset = "none";
        run_steps(m, c, data, 3);
        REQUIRE(changed_params(m, snap).empty());
    }
    SECTION("FT changes only diffusion-side parameters") {
        EditModel m;
        m.build(testutil::tiny_model_cfg());
        auto snap = snapshot(m);
        TrainConfig c;
        c.mode = TrainMode::FT;
        c.freeze_preset = "none";
        run_steps(m, c, data, 3);
        auto ch = changed_params(m, snap);
        REQUIRE_FALSE(ch.empty());
        for (const auto& n : ch)
            REQUIRE((n.rfind("unet.", 0) == 0 || n.rfind("textcond.", 0) == 0));
        REQUIRE(any_with_prefix(ch, "unet."));
        REQUIRE(any_with_prefix(ch, "textcond."));
    }
    SECTION("E2E changes language and diffusion sides but not the text pathway") {
        EditModel m;
        m.build(testutil::tiny_model_cfg());
        auto snap = snapshot(m);
        TrainConfig c;
        c.mode = TrainMode::E2E;
        c.freeze_preset = "none";
        run_steps(m, c, data, 3);
        auto ch = changed_params(m, snap);
        REQUIRE(any_with_prefix(ch, "mllm."));
        REQUIRE(any_with_prefix(ch, "edit_head."));
        REQUIRE(any_with_prefix(ch, "unet."));
        REQUIRE_FALSE(any_with_prefix(ch, "textcond."));
        REQUIRE_FALSE(any_with_prefix(ch, "vae."));
    }
}

TEST_CASE("freeze mask presets") {
    auto m1 = FreezeMask::preset("none");
    REQUIRE_FALSE(m1.is_frozen("mllm.block0.attn.wq.w"));
    auto m2 = FreezeMask::preset("self_attn");
    REQUIRE(m2.is_frozen("mllm.block0.attn.wq.w"));
    REQUIRE(m2.is_frozen("mllm.enc.block0.attn.wo.b"));
    REQUIRE_FALSE(m2.is_frozen("mllm.block0.mlp.fc1.w"));
    REQUIRE_FALSE(m2.is_frozen("mllm.tok_emb"));
    auto m3 = FreezeMask::preset("embed_head_only");
    REQUIRE(m3.is_frozen("mllm.block0.mlp.fc1.w"));
    REQUIRE(m3.is_frozen("mllm.enc.patch_embed.w"));
    REQUIRE(m3.is_frozen("mllm.pos_emb"));
    REQUIRE_FALSE(m3.is_frozen("mllm.tok_emb"));
    REQUIRE_FALSE(m3.is_frozen("mllm.lm_head.w"));
    REQUIRE_FALSE(m3.is_frozen("mllm.adapter.w"));
    REQUIRE_FALSE(m3.is_frozen("edit_head.start"));
}

TEST_CASE("embed_head_only mask keeps masked params bit-identical while training") {
    auto data = tiny_data(4);
    EditModel m;
    m.build(testutil::tiny_model_cfg());
    auto snap = snapshot(m);
    TrainConfig c;
    c.mode = TrainMode::E2E;
    c.freeze_preset = "embed_head_only";
    run_steps(m, c, data, 5);
    auto mask = FreezeMask::preset("embed_head_only");
    auto ch = changed_params(m, snap);
    for (const auto& n : ch) REQUIRE_FALSE(mask.is_frozen(n));
    // the unmasked MLLM pieces do move
    bool tok = false, head = false;
    for (const auto& n : ch) {
        if (n == "mllm.tok_emb") tok = true;
        if (n.rfind("mllm.lm_head.", 0) == 0) head = true;
    }
    REQUIRE(tok);
    REQUIRE(head);
}

TEST_CASE("condition dropout cases are mutually exclusive with correct rates") {
    EditModel m;
    m.build(testutil::tiny_model_cfg());
    TrainConfig c;
    Trainer tr(m, c);
    Rng rng(4242);
    int n = 10000;
    for (int i = 0; i < n; ++i) tr.sample_drop_case(rng);
    REQUIRE(tr.drops.total() == n);
    double se = std::sqrt(0.05 * 0.95 / n);
    auto close = [&](long count) {
        return std::abs(count / static_cast<double>(n) - 0.05) < 3.0 * se;
    };
    REQUIRE(close(tr.drops.image_only));
    REQUIRE(close(tr.drops.guidance_only));
    REQUIRE(close(tr.drops.both));
}

TEST_CASE("loss additivity and finite stats") {
    EditModel m;
    m.build(testutil::tiny_model_cfg());
    auto data = tiny_data(2);
    TrainConfig c;
    c.freeze_preset = "none";
    Trainer tr(m, c);
    std::vector<PreparedExample> prep;
    for (const auto& t : data) prep.push_back(tr.prepare(t));
    Rng rng(1);
    auto s = tr.training_step({&prep[0], &prep[1]}, rng);
    REQUIRE(std::abs(s.l_all - (s.l_ins + 0.5 * s.l_edit)) < 1e-9);
    REQUIRE(std::isfinite(s.grad_norm));
    REQUIRE(s.grad_norm > 0.0);
    REQUIRE(s.l_ins > 0.0);
    REQUIRE(s.l_edit > 0.0);
}

TEST_CASE("non-finite loss raises a diagnostic error") {
    EditModel m;
    m.build(testutil::tiny_model_cfg());
    m.store.find("unet.conv_out.w")->value(0, 0) = std::nan("");
    auto data = tiny_data(1);
    TrainConfig c;
    Trainer tr(m, c);
    auto prep = tr.prepare(data[0]);
    Rng rng(1);
    REQUIRE_THROWS_AS(tr.training_step({&prep}, rng), TrainingDiverged);
}

TEST_CASE("training loop is deterministic given the seed") {
    auto data = tiny_data(4);
    auto run = [&](const std::string& dir) {
        EditModel m;
        m.build(testutil::tiny_model_cfg());
        TrainConfig c;
        c.mode = TrainMode::E2E;
        c.batch_size = 2;
        c.steps = 4;
        c.seed = 11;
        Trainer tr(m, c);
        std::vector<PreparedExample> prep;
        for (const auto& t : data) prep.push_back(tr.prepare(t));
        return tr.train(prep, dir);
    };
    auto h1 = run("/tmp/mgie_train_a");
    auto h2 = run("/tmp/mgie_train_b");
    REQUIRE(h1.size() == h2.size());
    for (size_t i = 0; i < h1.size(); ++i) {
        REQUIRE(h1[i].l_all == h2[i].l_all);
        REQUIRE(h1[i].grad_norm == h2[i].grad_norm);
    }
    std::ifstream a("/tmp/mgie_train_a/loss.csv"), b("/tmp/mgie_train_b/loss.csv");
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    REQUIRE(sa == sb);
    REQUIRE(sa.rfind("step,L_ins,L_edit,L_all,grad_norm,lr_mllm,lr_diffusion\n", 0) == 0);
    REQUIRE(std::filesystem::exists("/tmp/mgie_train_a/model.ckpt"));
}

TEST_CASE("vae pretraining reduces loss, calibrates the scale and saves a partial checkpoint") {
    EditModel m;
    m.build(testutil::tiny_model_cfg());
    auto data = tiny_data(6);
    VAEPretrainConfig c;
    c.steps = 60;
    c.lr = 2e-3;
    c.seed = 5;

    // mean posterior-mean reconstruction loss over the whole dataset; a single
    // example can regress while the average objective improves
    auto mean_recon = [&]() {
        double total = 0.0;
        for (const auto& tr : data) {
            Graph g;
            auto [mean, logvar] = m.vae.encode_raw(g, tr.input_image);
            (void)logvar;
            Mat px = tr.input_image.to_matrix() * 2.0 - Mat::Ones(256, 3);
            total += g.val(g.mse(m.vae.decode_raw(g, mean), g.constant(px)))(0, 0);
        }
        return total / static_cast<double>(data.size());
    };
    double before = mean_recon();
    double last = pretrain_vae(m, data, c, "/tmp/mgie_vae.ckpt");
    REQUIRE(std::isfinite(last));
    double scale = m.vae.latent_scale->value(0, 0);
    REQUIRE(scale > 0.0);
    double after = mean_recon();
    REQUIRE(after < before);

    // the checkpoint holds only vae.* blocks and restores the scale
    EditModel fresh;
    fresh.build(testutil::tiny_model_cfg());
    fresh.vae.latent_scale->value(0, 0) = -1.0;
    uint64_t h = load_checkpoint("/tmp/mgie_vae.ckpt", fresh.store, false);
    REQUIRE(h == fresh.cfg.hash());
    REQUIRE(fresh.vae.latent_scale->value(0, 0) == Catch::Approx(scale).margin(1e-6));
    REQUIRE((fresh.store.find("mllm.tok_emb")->value - m.store.find("mllm.tok_emb")->value)
                .cwiseAbs()
                .maxCoeff() == 0.0);
}
