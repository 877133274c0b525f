#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgie/core/image.hpp"
#include "mgie/core/png_io.hpp"
#include "mgie/datagen/scene.hpp"
#include "mgie/datagen/text.hpp"

namespace mgie::datagen {

using json = nlohmann::ordered_json;

inline json command_to_json(const EditCommand& cmd) {
    static const char* ops[] = {"recolor", "remove", "brighten", "darken",
                                "increase_contrast", "translate"};
    static const char* targets[] = {"largest", "smallest", "by_kind", "global"};
    json j;
    j["op"] = ops[static_cast<int>(cmd.op)];
    j["target"] = targets[static_cast<int>(cmd.target)];
    if (cmd.target == TargetSel::by_kind) j["kind"] = kind_name(cmd.kind);
    if (cmd.op == EditOp::recolor) j["color"] = palette()[cmd.color].name;
    if (cmd.op == EditOp::translate) {
        j["amount"] = cmd.amount_value();
        j["dir"] = direction_name(cmd.dir);
    } else if (cmd.op == EditOp::brighten || cmd.op == EditOp::darken ||
               cmd.op == EditOp::increase_contrast) {
        j["amount"] = cmd.amount_value();
    }
    return j;
}

inline EditCommand command_from_json(const json& j) {
    EditCommand cmd;
    std::string op = j.at("op");
    if (op == "recolor") cmd.op = EditOp::recolor;
    else if (op == "remove") cmd.op = EditOp::remove;
    else if (op == "brighten") cmd.op = EditOp::brighten;
    else if (op == "darken") cmd.op = EditOp::darken;
    else if (op == "increase_contrast") cmd.op = EditOp::increase_contrast;
    else if (op == "translate") cmd.op = EditOp::translate;
    else throw std::invalid_argument("bad command op: " + op);
    std::string t = j.at("target");
    cmd.target = t == "largest" ? TargetSel::largest
                 : t == "smallest" ? TargetSel::smallest
                 : t == "by_kind" ? TargetSel::by_kind
                                  : TargetSel::global_target;
    if (j.contains("kind")) {
        std::string k = j["kind"];
        cmd.kind = k == "circle" ? ShapeKind::circle
                   : k == "square" ? ShapeKind::square
                                   : ShapeKind::triangle;
    }
    if (j.contains("color")) cmd.color = color_index(j["color"]);
    if (j.contains("amount")) cmd.amount = static_cast<int>(std::lround(10.0 * j["amount"].get<double>()));
    if (j.contains("dir")) {
        std::string d = j["dir"];
        cmd.dir = d == "left" ? Direction::left
                  : d == "right" ? Direction::right
                  : d == "up" ? Direction::up
                               : Direction::down;
    }
    return cmd;
}

struct ManifestRow {
    int id = 0;
    std::string input_png, goal_png;
    std::string instruction, expressive;
    EditCommand command;
    std::string split;
    uint64_t seed = 0;  // per-example seed; lets consumers rebuild the scene
};

struct DatasetManifest {
    std::string root;  // directory containing manifest.jsonl and images/
    std::vector<ManifestRow> rows;

    std::vector<const ManifestRow*> split_rows(const std::string& split) const {
        std::vector<const ManifestRow*> out;
        for (const auto& r : rows)
            if (r.split == split) out.push_back(&r);
        return out;
    }
};

struct Triple {
    Image input_image, goal_image;
    std::string instruction, expressive;
    EditCommand command;
    std::string split;
    uint64_t seed = 0;
};

// Deterministically derives the example for a given index.
inline Triple make_triple(uint64_t dataset_seed, int index, int size) {
    uint64_t seed_i = mix_seed(dataset_seed, static_cast<uint64_t>(index));
    Triple t;
    t.seed = seed_i;
    SceneSpec scene = sample_scene(seed_i);
    Rng cmd_rng(mix_seed(seed_i, 1));
    t.command = sample_command(scene, cmd_rng);
    auto [brief, expressive] = make_instruction_pair(t.command, scene, mix_seed(seed_i, 2));
    t.instruction = brief;
    t.expressive = expressive;
    t.input_image = render_scene(scene, size);
    t.goal_image = render_scene(apply_edit_oracle(scene, t.command), size);
    return t;
}

inline std::string split_of_index(int index, int n) {
    if (index < (8 * n) / 10) return "train";
    if (index < (9 * n) / 10) return "val";
    return "test";
}

inline DatasetManifest generate_dataset(int n, int size, uint64_t rng_seed,
                                        const std::string& out_path, bool overwrite = false) {
    namespace fs = std::filesystem;
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    fs::path root(out_path);
    fs::path manifest_path = root / "manifest.jsonl";
    if (fs::exists(manifest_path) && !overwrite)
        throw std::runtime_error("refusing to overwrite existing dataset at " + out_path);
    fs::create_directories(root / "images");

    DatasetManifest manifest;
    manifest.root = out_path;
    std::ofstream os(manifest_path);
    if (!os) throw std::runtime_error("cannot write manifest: " + manifest_path.string());
    for (int i = 0; i < n; ++i) {
        Triple t = make_triple(rng_seed, i, size);
        ManifestRow row;
        row.id = i;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "images/%06d", i);
        row.input_png = std::string(buf) + "_in.png";
        row.goal_png = std::string(buf) + "_goal.png";
        row.instruction = t.instruction;
        row.expressive = t.expressive;
        row.command = t.command;
        row.split = split_of_index(i, n);
        row.seed = t.seed;
        write_png((root / row.input_png).string(), t.input_image);
        write_png((root / row.goal_png).string(), t.goal_image);
        json j;
        j["id"] = row.id;
        j["input_png"] = row.input_png;
        j["goal_png"] = row.goal_png;
        j["instruction"] = row.instruction;
        j["expressive"] = row.expressive;
        j["command"] = command_to_json(row.command);
        j["split"] = row.split;
        j["seed"] = row.seed;
        os << j.dump() << "\n";
        manifest.rows.push_back(std::move(row));
    }
    os.close();
    if (!os) throw std::runtime_error("manifest write failed");
    return manifest;
}

inline DatasetManifest load_manifest(const std::string& dataset_root) {
    namespace fs = std::filesystem;
    fs::path manifest_path = fs::path(dataset_root) / "manifest.jsonl";
    std::ifstream is(manifest_path);
    if (!is) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
    DatasetManifest m;
    m.root = dataset_root;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestRow row;
        row.id = j.at("id");
        row.input_png = j.at("input_png");
        row.goal_png = j.at("goal_png");
        row.instruction = j.at("instruction");
        row.expressive = j.at("expressive");
        row.command = command_from_json(j.at("command"));
        row.split = j.at("split");
        row.seed = j.at("seed");
        m.rows.push_back(std::move(row));
    }
    return m;
}

inline Triple load_triple(const DatasetManifest& m, const ManifestRow& row) {
    namespace fs = std::filesystem;
    Triple t;
    t.input_image = read_png((fs::path(m.root) / row.input_png).string());
    t.goal_image = read_png((fs::path(m.root) / row.goal_png).string());
    t.instruction = row.instruction;
    t.expressive = row.expressive;
    t.command = row.command;
    t.split = row.split;
    t.seed = row.seed;
    return t;
}

}  // namespace mgie::datagen
