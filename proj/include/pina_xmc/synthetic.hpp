#pragma once

// Small text XMC generator with label descriptions.
//
// Labels come in topics. Every label owns six signature tokens; its text
// lists all six plus a few topic words. Training instances mention their
// labels only through signature tokens 0-2, test instances through any of
// 0-5, so roughly half of the test evidence is vocabulary that only the
// label texts contain.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pina_xmc/ingest.hpp"
#include "pina_xmc/sparse.hpp"

namespace pina_xmc {

struct SyntheticConfig {
    std::size_t n_train = 200;
    std::size_t n_test = 100;
    std::size_t n_topics = 10;
    std::size_t labels_per_topic = 5;
    std::size_t signature_tokens = 6;
    std::size_t train_visible_tokens = 3;
    std::size_t max_labels_per_instance = 3;
    std::size_t topic_words = 5;
    std::size_t topic_tokens_per_instance = 2;
    std::size_t common_words = 30;
    std::size_t noise_tokens_per_instance = 6;
    std::uint64_t seed = 20240517;
};

struct SyntheticData {
    Dataset train;
    Dataset test;
};

namespace detail {

// rng() % n keeps the stream identical across standard libraries, which
// the distribution classes do not guarantee.
inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline Dataset synthetic_split(const SyntheticConfig& cfg, const Corpus& label_text, std::size_t n,
                               std::size_t visible, std::mt19937_64& rng, const char* split) {
    Dataset ds;
    ds.split = split;
    ds.labels = label_text;
    std::vector<Triplet> edges;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t topic = draw(rng, cfg.n_topics);
        const std::size_t count = 1 + draw(rng, cfg.max_labels_per_instance);
        std::vector<std::size_t> picked;
        while (picked.size() < count) {
            const std::size_t l = topic * cfg.labels_per_topic + draw(rng, cfg.labels_per_topic);
            if (std::find(picked.begin(), picked.end(), l) == picked.end()) picked.push_back(l);
        }
        std::vector<std::string> words;
        for (std::size_t l : picked) {
            edges.push_back({static_cast<index_t>(i), static_cast<index_t>(l), 1.0f});
            words.push_back("lab" + std::to_string(l) + "tok" + std::to_string(draw(rng, visible)));
        }
        for (std::size_t k = 0; k < cfg.topic_tokens_per_instance; ++k) {
            words.push_back("topic" + std::to_string(topic) + "w" + std::to_string(draw(rng, cfg.topic_words)));
        }
        for (std::size_t k = 0; k < cfg.noise_tokens_per_instance; ++k) {
            words.push_back("common" + std::to_string(draw(rng, cfg.common_words)));
        }
        // Fisher-Yates with the same portable draw
        for (std::size_t k = words.size(); k > 1; --k) std::swap(words[k - 1], words[draw(rng, k)]);
        std::string doc;
        for (const auto& w : words) {
            if (!doc.empty()) doc += ' ';
            doc += w;
        }
        ds.instances.push_back(std::move(doc));
    }
    ds.y = from_coordinates(edges, n, label_text.size());
    return ds;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg = {}) {
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n_labels = cfg.n_topics * cfg.labels_per_topic;
    Corpus label_text;
    for (std::size_t l = 0; l < n_labels; ++l) {
        const std::size_t topic = l / cfg.labels_per_topic;
        std::string text = "Label " + std::to_string(l) + ":";
        for (std::size_t k = 0; k < cfg.signature_tokens; ++k) text += " lab" + std::to_string(l) + "tok" + std::to_string(k);
        for (std::size_t k = 0; k < 3; ++k) {
            text += " topic" + std::to_string(topic) + "w" + std::to_string(detail::draw(rng, cfg.topic_words));
        }
        label_text.push_back(std::move(text));
    }
    SyntheticData out;
    out.train = detail::synthetic_split(cfg, label_text, cfg.n_train, cfg.train_visible_tokens, rng, "train");
    out.test = detail::synthetic_split(cfg, label_text, cfg.n_test, cfg.signature_tokens, rng, "test");
    return out;
}

}  // namespace pina_xmc
