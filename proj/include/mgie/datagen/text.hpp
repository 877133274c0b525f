#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "mgie/datagen/scene.hpp"

namespace mgie::datagen {

inline std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

inline std::string location_name(double cx, double cy) {
    std::string v = cy < 1.0 / 3 ? "top" : cy > 2.0 / 3 ? "bottom" : "";
    std::string h = cx < 1.0 / 3 ? "left" : cx > 2.0 / 3 ? "right" : "";
    if (v.empty() && h.empty()) return "middle";
    if (v.empty()) return h;
    if (h.empty()) return v;
    return v + " " + h;
}

inline const char* amount_name(int bucket) {
    switch (bucket) {
        case 1: return "slightly";
        case 2: return "moderately";
        case 3: return "strongly";
        default: throw std::invalid_argument("amount bucket out of range");
    }
}

inline int amount_bucket(const std::string& word) {
    if (word == "slightly") return 1;
    if (word == "moderately") return 2;
    if (word == "strongly") return 3;
    throw std::invalid_argument("unknown amount word: " + word);
}

inline const char* direction_name(Direction d) {
    switch (d) {
        case Direction::left: return "left";
        case Direction::right: return "right";
        case Direction::up: return "up";
        default: return "down";
    }
}

// Brief templates spell out everything except what only the image can show.
// The operation, the size-based object selector (or the kind name when the
// kind itself is the selector), the strength adverb, the color, and the
// direction all appear; the target's shape kind under a size selector and
// its location never do, so expanding the brief requires the image.
inline std::string brief_target(const EditCommand& cmd) {
    switch (cmd.target) {
        case TargetSel::largest: return "the big one";
        case TargetSel::smallest: return "the small one";
        case TargetSel::by_kind: return std::string("the ") + kind_name(cmd.kind);
        default: return "it";
    }
}

inline std::string make_brief(const EditCommand& cmd, Rng& rng) {
    auto pick = [&](std::initializer_list<std::string> opts) {
        std::vector<std::string> v(opts);
        return v[rng.randint(0, static_cast<int64_t>(v.size()) - 1)];
    };
    std::string t = brief_target(cmd);
    switch (cmd.op) {
        case EditOp::recolor: {
            std::string c = palette()[cmd.color].name;
            return pick({"make " + t + " " + c, "paint " + t + " " + c, "turn " + t + " " + c});
        }
        case EditOp::remove:
            return pick({"remove " + t, "get rid of " + t, "erase " + t});
        case EditOp::translate: {
            std::string a = amount_name(cmd.amount);
            std::string d = direction_name(cmd.dir);
            return pick({"move " + t + " " + a + " " + d, "shift " + t + " " + a + " " + d});
        }
        case EditOp::brighten: {
            std::string a = amount_name(cmd.amount);
            return pick({"make it " + a + " brighter", "brighten this up " + a});
        }
        case EditOp::darken: {
            std::string a = amount_name(cmd.amount);
            return pick({"make it " + a + " darker", "darken this " + a});
        }
        default: {
            std::string a = amount_name(cmd.amount);
            return pick({"boost the contrast " + a, "add " + a + " more contrast"});
        }
    }
}

// Target phrase encodes the selector: "big" -> largest, "small" -> smallest,
// bare kind -> by_kind. Location is included for explicitness.
inline std::string target_phrase(const SceneSpec& scene, const EditCommand& cmd) {
    int idx = resolve_target(scene, cmd);
    const ShapeSpec& s = scene.shapes[idx];
    std::string size_word = cmd.target == TargetSel::largest ? "big "
                           : cmd.target == TargetSel::smallest ? "small "
                                                               : "";
    return "the " + size_word + kind_name(s.kind) + " in the " + location_name(s.cx, s.cy);
}

inline std::string make_expressive(const SceneSpec& scene, const EditCommand& cmd) {
    switch (cmd.op) {
        case EditOp::recolor:
            return "recolor " + target_phrase(scene, cmd) + " to " + palette()[cmd.color].name;
        case EditOp::remove:
            return "remove " + target_phrase(scene, cmd);
        case EditOp::translate:
            return "move " + target_phrase(scene, cmd) + " " + amount_name(cmd.amount) +
                   " to the " + direction_name(cmd.dir);
        case EditOp::brighten:
            return std::string("increase the image brightness ") + amount_name(cmd.amount);
        case EditOp::darken:
            return std::string("decrease the image brightness ") + amount_name(cmd.amount);
        default:
            return std::string("increase the image contrast ") + amount_name(cmd.amount);
    }
}

inline std::pair<std::string, std::string> make_instruction_pair(const EditCommand& cmd,
                                                                 const SceneSpec& scene,
                                                                 uint64_t rng_seed) {
    Rng rng(mix_seed(rng_seed, 0x1e41));
    return {make_brief(cmd, rng), make_expressive(scene, cmd)};
}

// Inverse of make_expressive; the test oracle for expressive sufficiency.
inline EditCommand parse_expressive(const std::string& text) {
    std::vector<std::string> w = split_words(text);
    if (w.empty()) throw std::invalid_argument("empty expressive text");
    EditCommand cmd;
    auto parse_kind = [](const std::string& s) {
        if (s == "circle") return ShapeKind::circle;
        if (s == "square") return ShapeKind::square;
        if (s == "triangle") return ShapeKind::triangle;
        throw std::invalid_argument("unknown shape kind: " + s);
    };
    auto parse_dir = [](const std::string& s) {
        if (s == "left") return Direction::left;
        if (s == "right") return Direction::right;
        if (s == "up") return Direction::up;
        if (s == "down") return Direction::down;
        throw std::invalid_argument("unknown direction: " + s);
    };
    // target phrase starts at w[i] == "the"
    auto parse_target = [&](size_t i, size_t& after) {
        if (w.at(i) != "the") throw std::invalid_argument("malformed target phrase");
        ++i;
        if (w.at(i) == "big") { cmd.target = TargetSel::largest; ++i; }
        else if (w.at(i) == "small") { cmd.target = TargetSel::smallest; ++i; }
        else cmd.target = TargetSel::by_kind;
        cmd.kind = parse_kind(w.at(i));
        ++i;
        if (w.at(i) != "in" || w.at(i + 1) != "the")
            throw std::invalid_argument("malformed location phrase");
        i += 2;
        // location is one word, or two when a top/bottom row is qualified
        size_t loc_start = i;
        ++i;
        if (i < w.size() && (w[loc_start] == "top" || w[loc_start] == "bottom") &&
            (w[i] == "left" || w[i] == "right"))
            ++i;
        after = i;
    };
    if (w[0] == "recolor") {
        cmd.op = EditOp::recolor;
        size_t after = 0;
        parse_target(1, after);
        if (w.at(after) != "to") throw std::invalid_argument("missing color clause");
        cmd.color = color_index(w.at(after + 1));
    } else if (w[0] == "remove") {
        cmd.op = EditOp::remove;
        size_t after = 0;
        parse_target(1, after);
    } else if (w[0] == "move") {
        cmd.op = EditOp::translate;
        size_t after = 0;
        parse_target(1, after);
        cmd.amount = amount_bucket(w.at(after));
        if (w.at(after + 1) != "to" || w.at(after + 2) != "the")
            throw std::invalid_argument("malformed direction clause");
        cmd.dir = parse_dir(w.at(after + 3));
    } else if (w[0] == "increase" || w[0] == "decrease") {
        if (w.size() != 5 || w[1] != "the" || w[2] != "image")
            throw std::invalid_argument("malformed global edit text");
        cmd.target = TargetSel::global_target;
        cmd.amount = amount_bucket(w[4]);
        if (w[3] == "brightness")
            cmd.op = w[0] == "increase" ? EditOp::brighten : EditOp::darken;
        else if (w[3] == "contrast" && w[0] == "increase")
            cmd.op = EditOp::increase_contrast;
        else
            throw std::invalid_argument("unknown global edit: " + text);
    } else {
        throw std::invalid_argument("unrecognized expressive text: " + text);
    }
    return cmd;
}

// Caption for metric use (directional similarity); describes the rendered scene.
inline std::string describe_scene(const SceneSpec& scene) {
    std::string s = scene.global_brightness >= 0.75 ? "a bright" : "a dim";
    if (scene.contrast > 0.0) s += " high contrast";
    s += " scene";
    if (scene.shapes.empty()) return s + " with nothing in it";
    s += " with";
    for (size_t i = 0; i < scene.shapes.size(); ++i) {
        const auto& sh = scene.shapes[i];
        if (i > 0) s += " and";
        s += std::string(" a ") + palette()[sh.color].name + " " + kind_name(sh.kind) +
             " in the " + location_name(sh.cx, sh.cy);
    }
    return s;
}

// Every word the templates can emit; the LM vocabulary is built from this.
inline std::vector<std::string> template_word_list() {
    std::vector<std::string> words = {
        "make", "it", "paint", "turn", "remove", "get", "rid", "of", "erase",
        "move", "shift", "brighter", "brighten", "this", "up", "darker", "darken",
        "add", "more", "contrast", "boost", "the", "recolor", "to", "in",
        "big", "small", "one", "increase", "decrease", "image", "brightness",
        "slightly", "moderately", "strongly",
        "circle", "square", "triangle",
        "top", "bottom", "left", "right", "middle", "up", "down",
        "a", "bright", "dim", "high", "scene", "with", "nothing", "and",
    };
    for (const auto& c : palette()) words.push_back(c.name);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

}  // namespace mgie::datagen
