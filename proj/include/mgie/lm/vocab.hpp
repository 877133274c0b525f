#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgie/datagen/text.hpp"

namespace mgie::lm {

// Word-level vocabulary: PAD, BOS, EOS, the template words, then the N [IMG]
// ids as the last N entries.
struct Vocabulary {
    std::vector<std::string> id_to_word;
    std::unordered_map<std::string, int> word_to_id;
    int n_img = 0;

    static constexpr int pad = 0;
    static constexpr int bos = 1;
    static constexpr int eos = 2;

    int size() const { return static_cast<int>(id_to_word.size()); }
    int img_first() const { return size() - n_img; }
    int img_id(int k) const { return img_first() + k; }  // k in [0, n_img)
    bool is_img(int id) const { return id >= img_first(); }
    bool is_special(int id) const { return id < 3 || is_img(id); }

    static Vocabulary build(int n_img_tokens) {
        if (n_img_tokens < 1) throw std::invalid_argument("n_img_tokens must be >= 1");
        Vocabulary v;
        v.n_img = n_img_tokens;
        v.id_to_word = {"<pad>", "<bos>", "<eos>"};
        auto words = datagen::template_word_list();
        for (const std::string& w : {"what", "will", "be", "like", "if"})
            if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
        std::sort(words.begin() + 0, words.end());
        for (const auto& w : words) v.id_to_word.push_back(w);
        for (int k = 0; k < n_img_tokens; ++k)
            v.id_to_word.push_back("<img_" + std::to_string(k) + ">");
        for (int i = 0; i < v.size(); ++i) v.word_to_id[v.id_to_word[i]] = i;
        return v;
    }

    int id_of(const std::string& w) const {
        auto it = word_to_id.find(w);
        if (it == word_to_id.end()) throw std::invalid_argument("word not in vocabulary: " + w);
        return it->second;
    }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        for (const auto& w : datagen::split_words(text)) out.push_back(id_of(w));
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string s;
        for (int id : ids) {
            if (is_special(id)) continue;
            if (!s.empty()) s += ' ';
            s += id_to_word.at(id);
        }
        return s;
    }

    void save(const std::string& path) const {
        nlohmann::ordered_json j;
        j["n_img"] = n_img;
        j["words"] = id_to_word;
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write vocabulary: " + path);
        os << j.dump(2) << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot read vocabulary: " + path);
        nlohmann::json j = nlohmann::json::parse(is);
        Vocabulary v;
        v.n_img = j.at("n_img");
        v.id_to_word = j.at("words").get<std::vector<std::string>>();
        for (int i = 0; i < v.size(); ++i) v.word_to_id[v.id_to_word[i]] = i;
        return v;
    }
};

}  // namespace mgie::lm
