#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgie/core/rng.hpp"

namespace mgie {

struct Param {
    std::string name;
    Eigen::MatrixXd value;
    int id = -1;
};

// Simple wildcard match: '*' matches any substring.
inline bool pattern_match(const std::string& pat, const std::string& s) {
    size_t p = 0, i = 0, star = std::string::npos, mark = 0;
    while (i < s.size()) {
        if (p < pat.size() && (pat[p] == s[i])) { ++p; ++i; }
        else if (p < pat.size() && pat[p] == '*') { star = p++; mark = i; }
        else if (star != std::string::npos) { p = star + 1; i = ++mark; }
        else return false;
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
}

class ParamStore {
public:
    Param& add(const std::string& name, int rows, int cols, double init_scale, Rng& rng) {
        auto p = std::make_unique<Param>();
        p->name = name;
        p->id = static_cast<int>(params_.size());
        p->value.resize(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                p->value(i, j) = init_scale == 0.0 ? 0.0 : init_scale * rng.normal();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Param& add_const(const std::string& name, const Eigen::MatrixXd& v) {
        auto p = std::make_unique<Param>();
        p->name = name;
        p->id = static_cast<int>(params_.size());
        p->value = v;
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Param* find(const std::string& name) {
        for (auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }

    std::vector<Param*> match(const std::string& pattern) {
        std::vector<Param*> out;
        for (auto& p : params_)
            if (pattern_match(pattern, p->name)) out.push_back(p.get());
        return out;
    }

    size_t size() const { return params_.size(); }
    Param& operator[](size_t i) { return *params_[i]; }
    const Param& operator[](size_t i) const { return *params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }

private:
    std::vector<std::unique_ptr<Param>> params_;
};

// ---- checkpoint format ----
// "MGIE" magic, u32 version, u64 config hash, u32 block count, then per block:
// u32 name length, name bytes, u32 rows, u32 cols, rows*cols float32 LE.

namespace detail {
inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}
inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}
inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}
inline uint64_t get_u64(std::istream& is) {
    uint64_t lo = get_u32(is);
    uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}
}  // namespace detail

constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, ParamStore& store,
                            uint64_t config_hash, const std::string& prefix = "") {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write("MGIE", 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u64(os, config_hash);
    std::vector<const Param*> sel;
    for (auto& p : store)
        if (prefix.empty() || p->name.rfind(prefix, 0) == 0) sel.push_back(p.get());
    detail::put_u32(os, static_cast<uint32_t>(sel.size()));
    for (const Param* p : sel) {
        detail::put_u32(os, static_cast<uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        detail::put_u32(os, static_cast<uint32_t>(p->value.rows()));
        detail::put_u32(os, static_cast<uint32_t>(p->value.cols()));
        for (Eigen::Index j = 0; j < p->value.cols(); ++j)
            for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
                float f = static_cast<float>(p->value(i, j));
                uint32_t bits;
                std::memcpy(&bits, &f, 4);
                detail::put_u32(os, bits);
            }
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

// Reads only the stored config hash from a checkpoint header.
inline uint64_t read_checkpoint_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "MGIE", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");
    uint64_t hash = detail::get_u64(is);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return hash;
}

// Loads blocks into existing params by name. Returns the stored config hash.
// Unknown names are an error unless allow_partial; missing params are left as-is.
inline uint64_t load_checkpoint(const std::string& path, ParamStore& store,
                                bool allow_partial = false) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "MGIE", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");
    uint64_t hash = detail::get_u64(is);
    uint32_t count = detail::get_u32(is);
    for (uint32_t k = 0; k < count; ++k) {
        uint32_t nlen = detail::get_u32(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        uint32_t rows = detail::get_u32(is);
        uint32_t cols = detail::get_u32(is);
        Param* p = store.find(name);
        if (p && (p->value.rows() != rows || p->value.cols() != cols))
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        for (uint32_t j = 0; j < cols; ++j)
            for (uint32_t i = 0; i < rows; ++i) {
                uint32_t bits = detail::get_u32(is);
                float f;
                std::memcpy(&f, &bits, 4);
                if (p) p->value(i, j) = f;
            }
        if (!p && !allow_partial)
            throw std::runtime_error("checkpoint has unknown parameter " + name);
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return hash;
}

}  // namespace mgie
