#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

#include "mgie/model.hpp"
#include "mgie/trainer/trainer.hpp"

namespace mgie {

struct SamplerConfig {
    double alpha_v = 1.5;
    double alpha_x = 7.5;
    int steps = 0;  // 0 = every schedule step
    uint64_t seed = 0;
};

// Declarative experiment description: dataset + model + training + sampling.
// The model-config hash is embedded in every checkpoint written from it.
struct ExperimentConfig {
    std::string dataset;
    std::string out_dir = "out";
    ModelConfig model;
    trainer::TrainConfig train;
    SamplerConfig sampler;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["dataset"] = dataset;
        j["out_dir"] = out_dir;
        j["model"] = model.to_json();
        j["train"] = {{"mode", trainer::mode_to_string(train.mode)},
                      {"batch_size", train.batch_size},
                      {"steps", train.steps},
                      {"lr_mllm", train.lr_mllm},
                      {"lr_diffusion", train.lr_diffusion},
                      {"edit_loss_weight", train.edit_loss_weight},
                      {"dropout",
                       {{"image_only", train.dropout.image_only},
                        {"guidance_only", train.dropout.guidance_only},
                        {"both", train.dropout.both}}},
                      {"freeze", train.freeze_preset},
                      {"seed", train.seed},
                      {"ckpt_every", train.ckpt_every}};
        j["sampler"] = {{"alpha_v", sampler.alpha_v},
                        {"alpha_x", sampler.alpha_x},
                        {"steps", sampler.steps},
                        {"seed", sampler.seed}};
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        if (j.contains("dataset")) c.dataset = j["dataset"];
        if (j.contains("out_dir")) c.out_dir = j["out_dir"];
        if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
        if (j.contains("train")) {
            const auto& t = j["train"];
            if (t.contains("mode")) c.train.mode = trainer::mode_from_string(t["mode"]);
            if (t.contains("batch_size")) c.train.batch_size = t["batch_size"];
            if (t.contains("steps")) c.train.steps = t["steps"];
            if (t.contains("lr_mllm")) c.train.lr_mllm = t["lr_mllm"];
            if (t.contains("lr_diffusion")) c.train.lr_diffusion = t["lr_diffusion"];
            if (t.contains("edit_loss_weight")) c.train.edit_loss_weight = t["edit_loss_weight"];
            if (t.contains("dropout")) {
                const auto& d = t["dropout"];
                if (d.contains("image_only")) c.train.dropout.image_only = d["image_only"];
                if (d.contains("guidance_only"))
                    c.train.dropout.guidance_only = d["guidance_only"];
                if (d.contains("both")) c.train.dropout.both = d["both"];
            }
            if (t.contains("freeze")) c.train.freeze_preset = t["freeze"];
            if (t.contains("seed")) c.train.seed = t["seed"];
            if (t.contains("ckpt_every")) c.train.ckpt_every = t["ckpt_every"];
        }
        if (j.contains("sampler")) {
            const auto& s = j["sampler"];
            if (s.contains("alpha_v")) c.sampler.alpha_v = s["alpha_v"];
            if (s.contains("alpha_x")) c.sampler.alpha_x = s["alpha_x"];
            if (s.contains("steps")) c.sampler.steps = s["steps"];
            if (s.contains("seed")) c.sampler.seed = s["seed"];
        }
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open config: " + path);
        return from_json(nlohmann::json::parse(is));
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write config: " + path);
        os << to_json().dump(2) << "\n";
    }
};

}  // namespace mgie
