// Batch command-line surface: dataset generation, VAE pretraining, joint
// training, single-image editing, evaluation, and guidance-scale sweeps.
//
// Exit codes: 0 ok, 2 bad flags/validation, 3 I/O failure, 4 non-finite
// training loss, 5 resume/init checkpoint mismatch, 6 checkpoint/config hash
// mismatch at inference.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mgie/experiment.hpp"
#include "mgie/infer.hpp"
#include "mgie/metrics/eval.hpp"
#include "mgie/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace mgie;

namespace {

constexpr int kExitBadFlags = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitResumeMismatch = 5;
constexpr int kExitHashMismatch = 6;

void echo_hash(const ModelConfig& cfg) {
    std::printf("config_hash=%016llx\n", static_cast<unsigned long long>(cfg.hash()));
}

struct HashMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loads a checkpoint and verifies it was written under this configuration.
void load_checked(EditModel& model, const std::string& path) {
    if (read_checkpoint_hash(path) != model.cfg.hash())
        throw HashMismatch("checkpoint " + path + " was written under a different config");
    load_checkpoint(path, model.store, false);
}

std::vector<trainer::PreparedExample> prepare_split(trainer::Trainer& tr,
                                                    const datagen::DatasetManifest& manifest,
                                                    const std::string& split) {
    std::vector<trainer::PreparedExample> out;
    for (const auto* row : manifest.split_rows(split))
        out.push_back(tr.prepare(datagen::load_triple(manifest, *row)));
    return out;
}

int cmd_gen_data(int n, int size, uint64_t seed, const std::string& out, bool overwrite) {
    auto manifest = datagen::generate_dataset(n, size, seed, out, overwrite);
    int tr = 0, va = 0, te = 0;
    for (const auto& r : manifest.rows)
        (r.split == "train" ? tr : r.split == "val" ? va : te)++;
    std::printf("manifest=%s\nrows=%d train=%d val=%d test=%d\n",
                (fs::path(out) / "manifest.jsonl").c_str(), n, tr, va, te);
    return 0;
}

int cmd_pretrain_vae(const std::string& config_path, int steps_override, double lr_override) {
    auto cfg = ExperimentConfig::load(config_path);
    EditModel model;
    model.build(cfg.model);
    echo_hash(model.cfg);
    auto manifest = datagen::load_manifest(cfg.dataset);
    std::vector<datagen::Triple> triples;
    for (const auto* row : manifest.split_rows("train"))
        triples.push_back(datagen::load_triple(manifest, *row));
    trainer::VAEPretrainConfig vc;
    vc.seed = cfg.train.seed;
    if (steps_override > 0) vc.steps = steps_override;
    if (lr_override > 0) vc.lr = lr_override;
    fs::create_directories(cfg.out_dir);
    std::string out = (fs::path(cfg.out_dir) / "vae.ckpt").string();
    double loss = trainer::pretrain_vae(model, triples, vc, out);
    std::printf("kl_weight=%g\nfinal_loss=%.6g\nlatent_scale=%.6g\ncheckpoint=%s\n",
                vc.kl_weight, loss, model.vae.latent_scale->value(0, 0), out.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& mode,
              const std::string& init_vae, const std::string& resume, int steps_override) {
    auto cfg = ExperimentConfig::load(config_path);
    if (!mode.empty()) cfg.train.mode = trainer::mode_from_string(mode);
    if (steps_override > 0) cfg.train.steps = steps_override;
    cfg.train.validate();
    EditModel model;
    model.build(cfg.model);
    echo_hash(model.cfg);
    for (const std::string& path : {init_vae, resume}) {
        if (path.empty()) continue;
        if (read_checkpoint_hash(path) != model.cfg.hash())
            throw trainer::TrainingDiverged("__resume_mismatch__");  // mapped to exit 5
        load_checkpoint(path, model.store, false);
    }
    auto manifest = datagen::load_manifest(cfg.dataset);
    trainer::Trainer tr(model, cfg.train);
    auto prepared = prepare_split(tr, manifest, "train");
    std::string run_dir =
        (fs::path(cfg.out_dir) / ("train_" + trainer::mode_to_string(cfg.train.mode))).string();
    auto history = tr.train(prepared, run_dir);
    const auto& last = history.back();
    std::printf("mode=%s steps=%d\nfinal L_ins=%.6g L_edit=%.6g L_all=%.6g\nrun_dir=%s\n",
                trainer::mode_to_string(cfg.train.mode).c_str(), cfg.train.steps, last.l_ins,
                last.l_edit, last.l_all, run_dir.c_str());
    return 0;
}

EditOptions options_for(const ExperimentConfig& cfg, const std::string& mode) {
    EditOptions o;
    o.alpha_v = cfg.sampler.alpha_v;
    o.alpha_x = cfg.sampler.alpha_x;
    o.sample_steps = cfg.sampler.steps;
    o.seed = cfg.sampler.seed;
    trainer::TrainMode m = trainer::mode_from_string(mode);
    o.use_visual_prefix = m == trainer::TrainMode::E2E;
    o.use_textcond = m == trainer::TrainMode::FZ || m == trainer::TrainMode::FT;
    return o;
}

int cmd_edit(const std::string& config_path, const std::string& ckpt,
             const std::string& image_path, const std::string& instruction,
             const std::string& out_png, const std::string& mode, double alpha_v,
             double alpha_x, int steps, uint64_t seed) {
    auto cfg = ExperimentConfig::load(config_path);
    EditModel model;
    model.build(cfg.model);
    echo_hash(model.cfg);
    load_checked(model, ckpt);
    Image input = read_png(image_path);
    EditOptions o = options_for(cfg, mode);
    if (alpha_v >= 0.0) o.alpha_v = alpha_v;
    if (alpha_x >= 0.0) o.alpha_x = alpha_x;
    if (steps > 0) o.sample_steps = steps;
    o.seed = seed;
    EditResult res = run_edit(model, input, instruction, o);
    write_png(out_png, res.edited);
    std::printf("expressive: %s\nedited=%s\n", res.expressive.c_str(), out_png.c_str());
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& split,
             const std::string& mode, int max_examples, const std::string& out_csv) {
    auto cfg = ExperimentConfig::load(config_path);
    EditModel model;
    model.build(cfg.model);
    echo_hash(model.cfg);
    load_checked(model, ckpt);
    auto manifest = datagen::load_manifest(cfg.dataset);
    metrics::TrainedEmbedder primary(model);
    metrics::RandomProjectionEmbedder secondary(64);
    auto report = metrics::evaluate(model, manifest, split, options_for(cfg, mode), primary,
                                    secondary, max_examples);
    std::string out = out_csv.empty() ? (fs::path(cfg.out_dir) / "eval.csv").string() : out_csv;
    fs::create_directories(fs::path(out).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out).parent_path());
    report.write_csv(out);
    std::printf("examples=%zu\nmean L1=%.6g SSIM=%.6g CVS_like=%.6g CTS_like=%.6g "
                "directional=%.6g\nreport=%s\n",
                report.rows.size(), report.mean.l1, report.mean.ssim_v, report.mean.cvs_like,
                report.mean.cts_like, report.mean.directional, out.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& ckpt,
              const std::string& split, double alpha_x, std::vector<double> grid,
              int max_examples, const std::string& out_csv) {
    auto cfg = ExperimentConfig::load(config_path);
    EditModel model;
    model.build(cfg.model);
    echo_hash(model.cfg);
    load_checked(model, ckpt);
    auto manifest = datagen::load_manifest(cfg.dataset);
    metrics::TrainedEmbedder primary(model);
    if (grid.empty())
        for (double v = 1.0; v <= 2.2001; v += 0.2) grid.push_back(v);
    auto rows = metrics::tradeoff_sweep(model, manifest, split, alpha_x, grid,
                                        options_for(cfg, "E2E"), primary, max_examples);
    std::string out = out_csv.empty() ? (fs::path(cfg.out_dir) / "sweep.csv").string() : out_csv;
    metrics::write_sweep_csv(out, rows);
    std::printf("grid=%zu report=%s\n", rows.size(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale instruction-guided image editing"};
    app.require_subcommand(1);

    // gen-data
    int n = 0, size = 32;
    uint64_t seed = 0;
    std::string out;
    bool overwrite = false;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic editing dataset");
    gen->add_option("--n", n, "number of examples")->required()->check(CLI::PositiveNumber);
    gen->add_option("--size", size, "image side length");
    gen->add_option("--seed", seed, "dataset seed");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_flag("--overwrite", overwrite, "replace an existing dataset");

    std::string config_path, mode = "E2E", init_vae, resume, ckpt, image_path, instruction;
    std::string out_png = "edited.png", split = "test", out_csv;
    int steps_override = 0, max_examples = 0, sample_steps = 0;
    double alpha_v = -1.0, alpha_x = -1.0, sweep_alpha_x = 7.5;
    uint64_t edit_seed = 0;
    std::vector<double> grid;

    auto* pv = app.add_subcommand("pretrain-vae", "train the image autoencoder");
    pv->add_option("--config", config_path, "experiment config JSON")->required();
    pv->add_option("--steps", steps_override, "override step count");
    double vae_lr = 0.0;
    pv->add_option("--lr", vae_lr, "override learning rate");

    auto* tr = app.add_subcommand("train", "joint training");
    tr->add_option("--config", config_path, "experiment config JSON")->required();
    tr->add_option("--mode", mode, "E2E | LGIE | FZ | FT");
    tr->add_option("--init-vae", init_vae, "autoencoder checkpoint to start from");
    tr->add_option("--resume", resume, "full checkpoint to resume");
    tr->add_option("--steps", steps_override, "override step count");

    auto* ed = app.add_subcommand("edit", "edit one image");
    ed->add_option("--config", config_path, "experiment config JSON")->required();
    ed->add_option("--ckpt", ckpt, "model checkpoint")->required();
    ed->add_option("--image", image_path, "input PNG")->required();
    ed->add_option("--instruction", instruction, "brief edit instruction")->required();
    ed->add_option("--out", out_png, "output PNG path");
    ed->add_option("--mode", mode, "conditioning mode");
    ed->add_option("--alpha-v", alpha_v, "image guidance scale");
    ed->add_option("--alpha-x", alpha_x, "instruction guidance scale");
    ed->add_option("--steps", sample_steps, "sampler steps");
    ed->add_option("--seed", edit_seed, "sampling seed");

    auto* ev = app.add_subcommand("eval", "run the metric battery over a split");
    ev->add_option("--config", config_path, "experiment config JSON")->required();
    ev->add_option("--ckpt", ckpt, "model checkpoint")->required();
    ev->add_option("--split", split, "train | val | test");
    ev->add_option("--mode", mode, "conditioning mode");
    ev->add_option("--max", max_examples, "cap on example count");
    ev->add_option("--out", out_csv, "report CSV path");

    auto* sw = app.add_subcommand("sweep", "image-guidance trade-off sweep");
    sw->add_option("--config", config_path, "experiment config JSON")->required();
    sw->add_option("--ckpt", ckpt, "model checkpoint")->required();
    sw->add_option("--split", split, "dataset split");
    sw->add_option("--alpha-x", sweep_alpha_x, "fixed instruction scale");
    sw->add_option("--alpha-v-grid", grid, "image-scale grid values");
    sw->add_option("--max", max_examples, "cap on example count");
    sw->add_option("--out", out_csv, "curve CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitBadFlags;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(n, size, seed, out, overwrite);
        if (pv->parsed()) return cmd_pretrain_vae(config_path, steps_override, vae_lr);
        if (tr->parsed()) return cmd_train(config_path, mode, init_vae, resume, steps_override);
        if (ed->parsed())
            return cmd_edit(config_path, ckpt, image_path, instruction, out_png, mode, alpha_v,
                            alpha_x, sample_steps, edit_seed);
        if (ev->parsed())
            return cmd_eval(config_path, ckpt, split, mode, max_examples, out_csv);
        if (sw->parsed())
            return cmd_sweep(config_path, ckpt, split, sweep_alpha_x, grid, max_examples,
                             out_csv);
    } catch (const HashMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitHashMismatch;
    } catch (const trainer::TrainingDiverged& e) {
        if (std::string(e.what()).find("__resume_mismatch__") != std::string::npos) {
            std::fprintf(stderr, "error: checkpoint does not match this configuration\n");
            return kExitResumeMismatch;
        }
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDiverged;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBadFlags;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitBadFlags;
}
