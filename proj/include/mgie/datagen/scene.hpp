#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgie/core/image.hpp"
#include "mgie/core/rng.hpp"

namespace mgie::datagen {

enum class ShapeKind { circle, square, triangle };
enum class EditOp { recolor, remove, brighten, darken, increase_contrast, translate };
enum class TargetSel { largest, smallest, by_kind, global_target };
enum class Direction { left, right, up, down };

inline const char* kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        default: return "triangle";
    }
}

struct PaletteColor {
    const char* name;
    double r, g, b;
};

// Fixed named palette; "red" must dominate its channel strongly enough that a
// recolored shape is detectable against any brightness in [0.5, 1].
inline const std::array<PaletteColor, 8>& palette() {
    static const std::array<PaletteColor, 8> p = {{
        {"red", 0.90, 0.10, 0.10},
        {"green", 0.10, 0.75, 0.20},
        {"blue", 0.15, 0.25, 0.90},
        {"yellow", 0.95, 0.85, 0.10},
        {"purple", 0.60, 0.15, 0.80},
        {"orange", 0.95, 0.55, 0.10},
        {"cyan", 0.10, 0.75, 0.80},
        {"magenta", 0.90, 0.20, 0.70},
    }};
    return p;
}

inline int color_index(const std::string& name) {
    for (size_t i = 0; i < palette().size(); ++i)
        if (name == palette()[i].name) return static_cast<int>(i);
    throw std::invalid_argument("unknown color name: " + name);
}

struct ShapeSpec {
    ShapeKind kind = ShapeKind::circle;
    double cx = 0.5, cy = 0.5;  // fractional canvas coordinates
    double radius = 0.1;        // fraction of canvas, bounding-circle radius
    int color = 0;              // palette index

    bool contains(double px, double py) const {
        double dx = px - cx, dy = py - cy;
        switch (kind) {
            case ShapeKind::circle:
                return dx * dx + dy * dy <= radius * radius;
            case ShapeKind::square: {
                double h = radius / std::sqrt(2.0);
                return std::abs(dx) <= h && std::abs(dy) <= h;
            }
            case ShapeKind::triangle: {
                // equilateral, apex up, inscribed in the bounding circle
                double ax = 0.0, ay = -radius;
                double bx = radius * std::cos(M_PI / 6.0), by = radius * 0.5;
                double cx2 = -bx, cy2 = by;
                auto side = [&](double x1, double y1, double x2, double y2) {
                    return (x2 - x1) * (dy - y1) - (y2 - y1) * (dx - x1);
                };
                double s1 = side(ax, ay, bx, by);
                double s2 = side(bx, by, cx2, cy2);
                double s3 = side(cx2, cy2, ax, ay);
                return (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
            }
        }
        return false;
    }
};

struct SceneSpec {
    std::vector<ShapeSpec> shapes;  // ordered by radius descending
    double background = 0.5;        // gray level
    double global_brightness = 1.0;
    double contrast = 0.0;          // render-time contrast boost delta

    bool valid() const {
        if (shapes.size() > 3) return false;
        for (size_t i = 0; i < shapes.size(); ++i) {
            const auto& s = shapes[i];
            if (s.radius <= 0.05 || s.radius >= 0.4) return false;
            if (s.cx - s.radius < 0.0 || s.cx + s.radius > 1.0) return false;
            if (s.cy - s.radius < 0.0 || s.cy + s.radius > 1.0) return false;
            if (i > 0 && shapes[i - 1].radius < s.radius) return false;
            for (size_t j = i + 1; j < shapes.size(); ++j) {
                double dx = s.cx - shapes[j].cx, dy = s.cy - shapes[j].cy;
                double d = std::sqrt(dx * dx + dy * dy);
                if (d <= s.radius + shapes[j].radius) return false;
            }
        }
        return true;
    }
};

struct EditCommand {
    EditOp op = EditOp::recolor;
    TargetSel target = TargetSel::largest;
    ShapeKind kind = ShapeKind::circle;  // meaningful when target == by_kind
    int color = 0;                       // recolor argument
    int amount = 0;                      // bucket 1/2/3 -> 0.1/0.2/0.3; 0 is the identity delta
    Direction dir = Direction::left;     // translate argument

    double amount_value() const { return 0.1 * amount; }

    bool operator==(const EditCommand& o) const {
        if (op != o.op || target != o.target) return false;
        if (target == TargetSel::by_kind && kind != o.kind) return false;
        switch (op) {
            case EditOp::recolor: return color == o.color;
            case EditOp::remove: return true;
            case EditOp::translate: return amount == o.amount && dir == o.dir;
            default: return amount == o.amount;
        }
    }
};

struct TargetNotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConstraintViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int resolve_target(const SceneSpec& scene, const EditCommand& cmd) {
    if (cmd.target == TargetSel::global_target) return -1;
    if (scene.shapes.empty()) throw TargetNotFound("scene has no shapes");
    if (cmd.target == TargetSel::largest) return 0;
    if (cmd.target == TargetSel::smallest) return static_cast<int>(scene.shapes.size()) - 1;
    int found = -1;
    for (size_t i = 0; i < scene.shapes.size(); ++i) {
        if (scene.shapes[i].kind == cmd.kind) {
            if (found >= 0) throw TargetNotFound("by_kind target is ambiguous");
            found = static_cast<int>(i);
        }
    }
    if (found < 0) throw TargetNotFound(std::string("no ") + kind_name(cmd.kind) + " in scene");
    return found;
}

inline SceneSpec sample_scene(uint64_t rng_seed) {
    Rng rng(mix_seed(rng_seed, 0x5ce9e));
    SceneSpec scene;
    scene.background = rng.uniform(0.05, 0.95);
    scene.global_brightness = rng.uniform(0.5, 1.0);
    int count = static_cast<int>(rng.randint(1, 3));
    int attempts = 0;
    while (static_cast<int>(scene.shapes.size()) < count) {
        if (++attempts > 1000)
            throw ConstraintViolation("sample_scene: placement attempts exhausted");
        // restart placement if earlier large shapes boxed the canvas in
        if (attempts % 50 == 0) scene.shapes.clear();
        ShapeSpec s;
        s.kind = static_cast<ShapeKind>(rng.randint(0, 2));
        // lower bound keeps every object edit visible: the smallest shape
        // still covers ~7% of the canvas, so a recolor/remove/translate moves
        // the image by clearly more than the editor's reconstruction floor
        s.radius = rng.uniform(0.15, 0.30);
        s.cx = rng.uniform(s.radius, 1.0 - s.radius);
        s.cy = rng.uniform(s.radius, 1.0 - s.radius);
        s.color = static_cast<int>(rng.randint(0, static_cast<int64_t>(palette().size()) - 1));
        bool ok = true;
        for (const auto& other : scene.shapes) {
            double dx = s.cx - other.cx, dy = s.cy - other.cy;
            if (std::sqrt(dx * dx + dy * dy) <= s.radius + other.radius + 0.01) ok = false;
        }
        if (ok) scene.shapes.push_back(s);
    }
    std::sort(scene.shapes.begin(), scene.shapes.end(),
              [](const ShapeSpec& a, const ShapeSpec& b) { return a.radius > b.radius; });
    return scene;
}

// 4x supersampled rasterization with box downsampling. Brightness and the
// contrast map are applied per subsample before clipping.
inline Image render_scene(const SceneSpec& scene, int size) {
    if (size != 16 && size != 32 && size != 64)
        throw std::invalid_argument("render_scene: size must be 16, 32 or 64");
    const int ss = 4;
    const int S = size * ss;
    Image hi(S, S);
    for (int y = 0; y < S; ++y) {
        double py = (y + 0.5) / S;
        for (int x = 0; x < S; ++x) {
            double px = (x + 0.5) / S;
            double r = scene.background, g = scene.background, b = scene.background;
            for (const auto& s : scene.shapes) {
                if (s.contains(px, py)) {
                    const auto& c = palette()[s.color];
                    r = c.r; g = c.g; b = c.b;
                    break;
                }
            }
            double rgb[3] = {r, g, b};
            for (int c = 0; c < 3; ++c) {
                double v = rgb[c] * scene.global_brightness;
                v = 0.5 + (1.0 + scene.contrast) * (v - 0.5);
                hi.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return downsample(hi, ss);
}

inline SceneSpec apply_edit_oracle(const SceneSpec& scene, const EditCommand& cmd) {
    SceneSpec out = scene;
    int idx = resolve_target(scene, cmd);
    switch (cmd.op) {
        case EditOp::recolor:
            out.shapes[idx].color = cmd.color;
            break;
        case EditOp::remove:
            out.shapes.erase(out.shapes.begin() + idx);
            break;
        case EditOp::brighten:
            out.global_brightness = std::clamp(scene.global_brightness + cmd.amount_value(), 0.2, 1.0);
            break;
        case EditOp::darken:
            out.global_brightness = std::clamp(scene.global_brightness - cmd.amount_value(), 0.2, 1.0);
            break;
        case EditOp::increase_contrast:
            out.contrast = scene.contrast + cmd.amount_value();
            break;
        case EditOp::translate: {
            double d = cmd.amount_value();
            double dx = cmd.dir == Direction::left ? -d : cmd.dir == Direction::right ? d : 0.0;
            double dy = cmd.dir == Direction::up ? -d : cmd.dir == Direction::down ? d : 0.0;
            out.shapes[idx].cx += dx;
            out.shapes[idx].cy += dy;
            if (!out.valid())
                throw ConstraintViolation("translate would leave canvas or overlap");
            break;
        }
    }
    return out;
}

// Mean absolute pixel difference the edit produces on the rendered canvas.
inline double edit_visibility(const SceneSpec& scene, const EditCommand& cmd) {
    Image a = render_scene(scene, 32);
    Image b = render_scene(apply_edit_oracle(scene, cmd), 32);
    double d = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) d += std::abs(a.data[i] - b.data[i]);
    return d / static_cast<double>(a.data.size());
}

// Samples a command valid for the scene (target exists, edit has an effect,
// translate stays in bounds). Edits must be clearly visible: near-invisible
// changes (a recolor to an almost identical color, a contrast tweak on a
// mid-gray scene) degenerate the editing task, so commands whose rendered
// effect falls below a floor are rejected; the floor relaxes after many
// attempts so every scene keeps at least one valid command. Deterministic
// given the rng state.
inline EditCommand sample_command(const SceneSpec& scene, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        double min_visible = attempt < 600 ? 0.03 : 0.012;
        EditCommand cmd;
        cmd.op = static_cast<EditOp>(rng.randint(0, 5));
        bool object_op = cmd.op == EditOp::recolor || cmd.op == EditOp::remove ||
                         cmd.op == EditOp::translate;
        if (object_op) {
            int sel = static_cast<int>(rng.randint(0, 2));
            cmd.target = static_cast<TargetSel>(sel);
            if (cmd.target == TargetSel::by_kind) {
                // pick a kind that appears exactly once, if any
                std::vector<ShapeKind> unique_kinds;
                for (int k = 0; k < 3; ++k) {
                    int c = 0;
                    for (const auto& s : scene.shapes)
                        if (s.kind == static_cast<ShapeKind>(k)) ++c;
                    if (c == 1) unique_kinds.push_back(static_cast<ShapeKind>(k));
                }
                if (unique_kinds.empty()) continue;
                cmd.kind = unique_kinds[rng.randint(0, static_cast<int64_t>(unique_kinds.size()) - 1)];
            }
            int idx;
            try {
                idx = resolve_target(scene, cmd);
            } catch (const TargetNotFound&) {
                continue;
            }
            cmd.kind = cmd.target == TargetSel::by_kind ? cmd.kind : scene.shapes[idx].kind;
            if (cmd.op == EditOp::recolor) {
                cmd.color = static_cast<int>(rng.randint(0, static_cast<int64_t>(palette().size()) - 1));
                if (cmd.color == scene.shapes[idx].color) continue;
            } else if (cmd.op == EditOp::translate) {
                cmd.dir = static_cast<Direction>(rng.randint(0, 3));
                cmd.amount = static_cast<int>(rng.randint(1, 3));
                try {
                    apply_edit_oracle(scene, cmd);
                } catch (const ConstraintViolation&) {
                    continue;
                }
            }
        } else {
            cmd.target = TargetSel::global_target;
            cmd.amount = static_cast<int>(rng.randint(1, 3));
            if (cmd.op == EditOp::brighten &&
                scene.global_brightness + cmd.amount_value() > 1.0) continue;
            if (cmd.op == EditOp::darken &&
                scene.global_brightness - cmd.amount_value() < 0.2) continue;
        }
        if (edit_visibility(scene, cmd) < min_visible) continue;
        return cmd;
    }
    throw ConstraintViolation("sample_command: no valid command found");
}

}  // namespace mgie::datagen
