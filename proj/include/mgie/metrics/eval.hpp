#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mgie/datagen/dataset.hpp"
#include "mgie/infer.hpp"
#include "mgie/metrics/metrics.hpp"

namespace mgie::metrics {

struct EvalRow {
    int id = 0;
    double l1 = 0.0, ssim_v = 0.0, perceptual = 0.0;
    double cvs_like = 0.0, dino_like = 0.0, cts_like = 0.0, directional = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalRow mean;  // id unused

    void finalize() {
        mean = EvalRow{};
        if (rows.empty()) return;
        for (const auto& r : rows) {
            mean.l1 += r.l1;
            mean.ssim_v += r.ssim_v;
            mean.perceptual += r.perceptual;
            mean.cvs_like += r.cvs_like;
            mean.dino_like += r.dino_like;
            mean.cts_like += r.cts_like;
            mean.directional += r.directional;
        }
        double n = static_cast<double>(rows.size());
        mean.l1 /= n; mean.ssim_v /= n; mean.perceptual /= n; mean.cvs_like /= n;
        mean.dino_like /= n; mean.cts_like /= n; mean.directional /= n;
    }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write eval report: " + path);
        os << "id,L1,SSIM,perceptual,CVS_like,DINO_like,CTS_like,directional\n";
        auto line = [&](const char* id, const EvalRow& r) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", id,
                          r.l1, r.ssim_v, r.perceptual, r.cvs_like, r.dino_like, r.cts_like,
                          r.directional);
            os << buf;
        };
        for (const auto& r : rows) line(std::to_string(r.id).c_str(), r);
        line("mean", mean);
    }
};

// Captions for the text-side metrics, regenerated from the example seed.
struct CaptionPair {
    std::string input_caption, goal_caption;
};

inline CaptionPair captions_for(const datagen::ManifestRow& row) {
    datagen::SceneSpec scene = datagen::sample_scene(row.seed);
    datagen::SceneSpec goal = datagen::apply_edit_oracle(scene, row.command);
    return {datagen::describe_scene(scene), datagen::describe_scene(goal)};
}

// Metric battery for one edited output against its goal.
inline EvalRow score_example(const datagen::Triple& t, const datagen::ManifestRow& row,
                             const Image& edited, const Embedder& primary,
                             const Embedder& secondary) {
    CaptionPair cap = captions_for(row);
    EvalRow r;
    r.id = row.id;
    r.l1 = l1_distance(edited, t.goal_image);
    r.ssim_v = ssim(edited, t.goal_image);
    r.perceptual = perceptual_distance(edited, t.goal_image, primary);
    r.cvs_like = cosine(primary.embed_image(edited), primary.embed_image(t.goal_image));
    r.dino_like = cosine(secondary.embed_image(edited), secondary.embed_image(t.goal_image));
    r.cts_like = text_visual_similarity(cap.goal_caption, edited, primary);
    r.directional = directional_similarity(t.input_image, edited, cap.input_caption,
                                           cap.goal_caption, primary);
    return r;
}

// Runs the model over a split and scores each edit. max_examples <= 0 means
// the whole split.
inline EvalReport evaluate(EditModel& model, const datagen::DatasetManifest& manifest,
                           const std::string& split, const EditOptions& opt,
                           const Embedder& primary, const Embedder& secondary,
                           int max_examples = 0) {
    auto rows = manifest.split_rows(split);
    if (rows.empty()) throw std::invalid_argument("evaluate: empty split " + split);
    if (max_examples > 0 && static_cast<int>(rows.size()) > max_examples)
        rows.resize(static_cast<size_t>(max_examples));
    EvalReport report;
    for (const auto* row : rows) {
        datagen::Triple t = datagen::load_triple(manifest, *row);
        EditOptions o = opt;
        o.seed = mix_seed(opt.seed, static_cast<uint64_t>(row->id));
        EditResult res = run_edit(model, t.input_image, t.instruction, o);
        report.rows.push_back(score_example(t, *row, res.edited, primary, secondary));
    }
    report.finalize();
    return report;
}

struct SweepRow {
    double alpha_v = 0.0;
    double mean_directional = 0.0;
    double mean_input_similarity = 0.0;  // image similarity of the edit to its input
};

// Guidance-scale trade-off: fixed instruction scale, varying image scale.
inline std::vector<SweepRow> tradeoff_sweep(EditModel& model,
                                            const datagen::DatasetManifest& manifest,
                                            const std::string& split, double alpha_x,
                                            const std::vector<double>& alpha_v_grid,
                                            const EditOptions& base_opt,
                                            const Embedder& primary, int max_examples = 0) {
    auto rows = manifest.split_rows(split);
    if (rows.empty()) throw std::invalid_argument("tradeoff_sweep: empty split " + split);
    if (max_examples > 0 && static_cast<int>(rows.size()) > max_examples)
        rows.resize(static_cast<size_t>(max_examples));
    std::vector<SweepRow> out;
    for (double av : alpha_v_grid) {
        SweepRow s;
        s.alpha_v = av;
        for (const auto* row : rows) {
            datagen::Triple t = datagen::load_triple(manifest, *row);
            EditOptions o = base_opt;
            o.alpha_v = av;
            o.alpha_x = alpha_x;
            o.seed = mix_seed(base_opt.seed, static_cast<uint64_t>(row->id));
            EditResult res = run_edit(model, t.input_image, t.instruction, o);
            CaptionPair cap = captions_for(*row);
            s.mean_directional += directional_similarity(t.input_image, res.edited,
                                                         cap.input_caption, cap.goal_caption,
                                                         primary);
            s.mean_input_similarity +=
                cosine(primary.embed_image(res.edited), primary.embed_image(t.input_image));
        }
        double n = static_cast<double>(rows.size());
        s.mean_directional /= n;
        s.mean_input_similarity /= n;
        out.push_back(s);
    }
    return out;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write sweep csv: " + path);
    os << "alpha_v,mean_directional,mean_input_similarity\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", r.alpha_v, r.mean_directional,
                      r.mean_input_similarity);
        os << buf;
    }
}

}  // namespace mgie::metrics
