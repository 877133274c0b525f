#pragma once

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgie/core/image.hpp"
#include "mgie/core/rng.hpp"
#include "mgie/datagen/text.hpp"
#include "mgie/model.hpp"

namespace mgie::metrics {

// Pluggable feature extractor standing in for large pretrained encoders.
// All implementations return unit-norm vectors and are deterministic.
struct Embedder {
    virtual ~Embedder() = default;
    virtual Eigen::VectorXd embed_image(const Image& im) const = 0;
    virtual Eigen::VectorXd embed_text(const std::string& text) const = 0;
};

inline Eigen::VectorXd unit(Eigen::VectorXd v) {
    double n = v.norm();
    if (n < 1e-12) {
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / n;
}

// (a) The artifact's own encoders: images through the visual encoder +
// adapter (mean pooled), text as a mean of word-embedding rows. Both land in
// the language width, so text-to-image similarity is meaningful after joint
// training has aligned the spaces.
class TrainedEmbedder : public Embedder {
public:
    explicit TrainedEmbedder(EditModel& model) : model_(model) {}

    Eigen::VectorXd embed_image(const Image& im) const override {
        Graph g;
        Var f = model_.mllm.project_adapter(g, model_.mllm.encode_image(g, im));
        return unit(g.val(f).colwise().mean().transpose());
    }

    Eigen::VectorXd embed_text(const std::string& text) const override {
        auto ids = model_.vocab.encode(text);
        if (ids.empty()) return unit(Eigen::VectorXd::Zero(model_.cfg.lm.model_dim));
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(model_.cfg.lm.model_dim);
        for (int id : ids) acc += model_.mllm.tok_emb->value.row(id).transpose();
        return unit(acc / static_cast<double>(ids.size()));
    }

private:
    EditModel& model_;
};

// (b) Fixed random projections: a seeded Gaussian matrix per input size for
// images, a seeded pseudo-random vector per word for text.
class RandomProjectionEmbedder : public Embedder {
public:
    explicit RandomProjectionEmbedder(int dim = 64, uint64_t seed = 0x70726f6aull)
        : dim_(dim), seed_(seed) {}

    Eigen::VectorXd embed_image(const Image& im) const override {
        size_t n = im.data.size();
        const Eigen::MatrixXd& P = projection(n);
        Eigen::VectorXd x(n);
        for (size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = im.data[i];
        return unit(P.transpose() * x);
    }

    Eigen::VectorXd embed_text(const std::string& text) const override {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
        auto words = datagen::split_words(text);
        if (words.empty()) return unit(acc);
        for (const auto& w : words) {
            uint64_t h = 1469598103934665603ull;
            for (unsigned char c : w) {
                h ^= c;
                h *= 1099511628211ull;
            }
            Rng rng(mix_seed(seed_, h));
            for (int d = 0; d < dim_; ++d) acc(d) += rng.normal();
        }
        return unit(acc / static_cast<double>(words.size()));
    }

private:
    const Eigen::MatrixXd& projection(size_t n) const {
        auto it = proj_.find(n);
        if (it != proj_.end()) return it->second;
        Rng rng(mix_seed(seed_, static_cast<uint64_t>(n)));
        Eigen::MatrixXd P(n, dim_);
        for (Eigen::Index j = 0; j < P.cols(); ++j)
            for (Eigen::Index i = 0; i < P.rows(); ++i) P(i, j) = rng.normal();
        return proj_.emplace(n, std::move(P)).first->second;
    }

    int dim_;
    uint64_t seed_;
    mutable std::map<size_t, Eigen::MatrixXd> proj_;
};

// Content key for images so externally computed embeddings can be joined
// back without filenames: FNV-1a over the 8-bit quantized pixels.
inline std::string image_key(const Image& im) {
    uint64_t h = 1469598103934665603ull;
    for (double v : im.data) {
        unsigned char b = static_cast<unsigned char>(
            std::lround(255.0 * std::min(1.0, std::max(0.0, v))));
        h ^= b;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// (c) Embeddings imported from a file pair: binary {n: u32, d: u32} header
// followed by n rows of d float32 little-endian values, and a JSONL sidecar
// with one {"row": i, "id": "..."} object per line. Text entries use the raw
// text as id; image entries use image_key().
class ExternalEmbedder : public Embedder {
public:
    ExternalEmbedder() = default;

    void add(const std::string& id, const Eigen::VectorXd& v) { table_[id] = unit(v); }

    static void save(const std::string& bin_path, const std::string& sidecar_path,
                     const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows) {
        if (rows.empty()) throw std::invalid_argument("external embeddings: nothing to save");
        std::ofstream os(bin_path, std::ios::binary);
        std::ofstream sc(sidecar_path);
        if (!os || !sc) throw std::runtime_error("cannot write embedding files");
        uint32_t n = static_cast<uint32_t>(rows.size());
        uint32_t d = static_cast<uint32_t>(rows[0].second.size());
        os.write(reinterpret_cast<const char*>(&n), 4);
        os.write(reinterpret_cast<const char*>(&d), 4);
        for (uint32_t i = 0; i < n; ++i) {
            if (rows[i].second.size() != d)
                throw std::invalid_argument("external embeddings: inconsistent widths");
            for (uint32_t j = 0; j < d; ++j) {
                float f = static_cast<float>(rows[i].second(j));
                os.write(reinterpret_cast<const char*>(&f), 4);
            }
            nlohmann::ordered_json line;
            line["row"] = i;
            line["id"] = rows[i].first;
            sc << line.dump() << "\n";
        }
    }

    static ExternalEmbedder load(const std::string& bin_path, const std::string& sidecar_path) {
        std::ifstream is(bin_path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open embedding file: " + bin_path);
        uint32_t n = 0, d = 0;
        is.read(reinterpret_cast<char*>(&n), 4);
        is.read(reinterpret_cast<char*>(&d), 4);
        std::vector<Eigen::VectorXd> rows(n, Eigen::VectorXd(d));
        for (uint32_t i = 0; i < n; ++i)
            for (uint32_t j = 0; j < d; ++j) {
                float f;
                is.read(reinterpret_cast<char*>(&f), 4);
                rows[i](j) = f;
            }
        if (!is) throw std::runtime_error("truncated embedding file: " + bin_path);
        std::ifstream sc(sidecar_path);
        if (!sc) throw std::runtime_error("cannot open embedding sidecar: " + sidecar_path);
        ExternalEmbedder e;
        std::string line;
        while (std::getline(sc, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            uint32_t row = j.at("row");
            if (row >= n) throw std::runtime_error("embedding sidecar row out of range");
            e.add(j.at("id").get<std::string>(), rows[row]);
        }
        return e;
    }

    Eigen::VectorXd embed_image(const Image& im) const override { return get(image_key(im)); }
    Eigen::VectorXd embed_text(const std::string& text) const override { return get(text); }

private:
    Eigen::VectorXd get(const std::string& id) const {
        auto it = table_.find(id);
        if (it == table_.end())
            throw std::runtime_error("no external embedding for id: " + id);
        return it->second;
    }
    std::map<std::string, Eigen::VectorXd> table_;
};

}  // namespace mgie::metrics
