#pragma once

// Statistical text features: bag-of-words counts or smoothed TF-IDF.
//
// Tokens are produced by splitting on Unicode whitespace, lowercasing, and
// trimming punctuation from both ends of each piece. Feature ids follow the
// lexicographic (byte) order of the retained tokens, so a fitted vocabulary
// does not depend on corpus order or threading.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/parallel.hpp"
#include "pina_xmc/sparse.hpp"

namespace pina_xmc {

/// Ordered documents; position is the instance (or label) id.
using Corpus = std::vector<std::string>;

enum class VectorizerMode { bow, tfidf };

inline std::string to_string(VectorizerMode mode) { return mode == VectorizerMode::bow ? "bow" : "tfidf"; }

inline VectorizerMode parse_vectorizer_mode(std::string_view s) {
    if (s == "bow") return VectorizerMode::bow;
    if (s == "tfidf") return VectorizerMode::tfidf;
    throw Error(ErrorKind::invalid_argument, "unknown vectorizer mode '" + std::string(s) + "'");
}

struct VectorizerConfig {
    VectorizerMode mode = VectorizerMode::tfidf;
    std::size_t min_df = 1;
};

namespace text {

namespace detail {

// Decodes one UTF-8 code point starting at pos; invalid bytes decode as
// themselves (one byte) so tokenization never throws.
inline char32_t decode(std::string_view s, std::size_t pos, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t off) -> int {
        if (pos + off >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + off]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) {
            len = 2;
            return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1);
        const int c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            len = 3;
            return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1);
        const int c2 = cont(2);
        const int c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            len = 4;
            return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
        }
    }
    len = 1;
    return b0;
}

inline void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace detail

/// Unicode White_Space property.
inline bool is_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
           c == 0x3000;
}

/// ASCII punctuation plus the common Latin-1 and General Punctuation marks.
inline bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E);
    }
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB || c == 0xBF ||
           (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
           (c >= 0x3008 && c <= 0x3011);
}

/// Simple case mapping for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
    if (c == 0x178) return 0xFF;
    if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x131 && c != 0x138 && c != 0x149 && c != 0x17F) {
        const bool odd_lower = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
        if (odd_lower) return (c % 2 == 1) ? c + 1 : c;
        return (c % 2 == 0) ? c + 1 : c;
    }
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    return c;
}

inline std::vector<std::string> tokenize(std::string_view doc) {
    std::vector<std::string> tokens;
    std::vector<char32_t> piece;
    auto flush = [&] {
        std::size_t b = 0;
        std::size_t e = piece.size();
        while (b < e && is_punct(piece[b])) ++b;
        while (e > b && is_punct(piece[e - 1])) --e;
        if (b < e) {
            std::string tok;
            for (std::size_t i = b; i < e; ++i) detail::encode(to_lower(piece[i]), tok);
            tokens.push_back(std::move(tok));
        }
        piece.clear();
    };
    for (std::size_t pos = 0; pos < doc.size();) {
        std::size_t len = 1;
        const char32_t cp = detail::decode(doc, pos, len);
        pos += len;
        if (is_space(cp)) {
            flush();
        } else {
            piece.push_back(cp);
        }
    }
    flush();
    return tokens;
}

}  // namespace text

class Vectorizer {
public:
    Vectorizer() = default;

    /// Rebuilds a vectorizer from its persisted state; tokens must be strictly
    /// increasing and every df within [min_df, num_docs].
    Vectorizer(VectorizerConfig config, std::size_t num_docs, std::vector<std::string> tokens,
               std::vector<std::uint32_t> doc_freq)
        : config_(config), num_docs_(num_docs), tokens_(std::move(tokens)), doc_freq_(std::move(doc_freq)) {
        if (tokens_.size() != doc_freq_.size()) {
            throw Error(ErrorKind::format, "token table and document frequencies differ in length");
        }
        for (std::size_t t = 0; t < tokens_.size(); ++t) {
            if (t > 0 && !(tokens_[t - 1] < tokens_[t])) {
                throw Error(ErrorKind::format, "token table not strictly sorted at line " + std::to_string(t + 1));
            }
            if (doc_freq_[t] < config_.min_df || doc_freq_[t] > num_docs_) {
                throw Error(ErrorKind::format, "document frequency out of range for token '" + tokens_[t] + "'");
            }
            index_.emplace(tokens_[t], static_cast<index_t>(t));
        }
    }

    static Vectorizer fit(const Corpus& corpus, VectorizerConfig config) {
        if (corpus.empty()) throw Error(ErrorKind::invalid_argument, "cannot fit a vectorizer on an empty corpus");
        std::map<std::string, std::uint32_t> df;
        for (const auto& doc : corpus) {
            auto toks = text::tokenize(doc);
            std::sort(toks.begin(), toks.end());
            toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
            for (auto& t : toks) ++df[std::move(t)];
        }
        std::vector<std::string> tokens;
        std::vector<std::uint32_t> freq;
        for (auto& [tok, count] : df) {
            if (count >= config.min_df) {
                tokens.push_back(tok);
                freq.push_back(count);
            }
        }
        return Vectorizer(config, corpus.size(), std::move(tokens), std::move(freq));
    }

    const VectorizerConfig& config() const { return config_; }
    std::size_t num_docs() const { return num_docs_; }
    std::size_t dim() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::uint32_t>& doc_freq() const { return doc_freq_; }

    std::optional<index_t> lookup(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    double idf(index_t feature) const {
        return std::log((1.0 + static_cast<double>(num_docs_)) / (1.0 + doc_freq_[feature])) + 1.0;
    }

    /// Out-of-vocabulary tokens are ignored; a document with no known token
    /// maps to the zero vector.
    SparseVector transform(std::string_view doc) const {
        std::vector<std::pair<index_t, double>> counts;
        for (const auto& tok : text::tokenize(doc)) {
            if (auto id = lookup(tok)) counts.emplace_back(*id, 1.0);
        }
        SparseVector v = SparseVector::from_pairs(dim(), std::move(counts));
        if (config_.mode == VectorizerMode::bow) return v;
        std::vector<double> weighted(v.nnz());
        double sq = 0.0;
        for (std::size_t p = 0; p < v.nnz(); ++p) {
            weighted[p] = v.values[p] * idf(v.indices[p]);
            sq += weighted[p] * weighted[p];
        }
        const double n = std::sqrt(sq);
        for (std::size_t p = 0; p < v.nnz(); ++p) v.values[p] = static_cast<float>(weighted[p] / n);
        return v;
    }

    SparseMatrix transform_corpus(const Corpus& corpus) const {
        std::vector<SparseVector> rows(corpus.size());
        parallel_for(corpus.size(), [&](std::size_t i) { rows[i] = transform(corpus[i]); });
        return from_rows(rows, dim());
    }

    bool operator==(const Vectorizer& other) const {
        return config_.mode == other.config_.mode && config_.min_df == other.config_.min_df &&
               num_docs_ == other.num_docs_ && tokens_ == other.tokens_ && doc_freq_ == other.doc_freq_;
    }

    // Persistence: a JSON manifest entry plus a token table with one
    // "token<TAB>df" line per feature, in feature-id order.

    nlohmann::json manifest() const {
        return {{"mode", to_string(config_.mode)},
                {"min_df", config_.min_df},
                {"num_docs", num_docs_},
                {"vocab_size", tokens_.size()}};
    }

    void save(const std::filesystem::path& dir, const std::string& stem = "vectorizer") const {
        std::string table;
        for (std::size_t t = 0; t < tokens_.size(); ++t) {
            table += tokens_[t];
            table += '\t';
            table += std::to_string(doc_freq_[t]);
            table += '\n';
        }
        io::write_file(dir / (stem + ".tsv"), table);
        io::write_file(dir / (stem + ".json"), manifest().dump(2) + "\n");
    }

    static Vectorizer load(const std::filesystem::path& dir, const std::string& stem = "vectorizer") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_file(dir / (stem + ".json")));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::format, (dir / (stem + ".json")).string() + ": " + e.what());
        }
        VectorizerConfig cfg;
        std::size_t num_docs = 0;
        std::size_t vocab_size = 0;
        try {
            cfg.mode = parse_vectorizer_mode(j.at("mode").get<std::string>());
            cfg.min_df = j.at("min_df").get<std::size_t>();
            num_docs = j.at("num_docs").get<std::size_t>();
            vocab_size = j.at("vocab_size").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::format, "vectorizer manifest: " + std::string(e.what()));
        }
        std::vector<std::string> tokens;
        std::vector<std::uint32_t> df;
        std::istringstream table(io::read_file(dir / (stem + ".tsv")));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(table, line)) {
            ++line_no;
            const auto tab = line.find('\t');
            if (tab == std::string::npos || tab == 0) {
                throw Error(ErrorKind::format, "token table line " + std::to_string(line_no) + ": expected token<TAB>df");
            }
            std::uint32_t count = 0;
            const auto* first = line.data() + tab + 1;
            const auto* last = line.data() + line.size();
            auto [ptr, ec] = std::from_chars(first, last, count);
            if (ec != std::errc() || ptr != last) {
                throw Error(ErrorKind::format, "token table line " + std::to_string(line_no) + ": bad df");
            }
            tokens.push_back(line.substr(0, tab));
            df.push_back(count);
        }
        if (tokens.size() != vocab_size) {
            throw Error(ErrorKind::format, "token table has " + std::to_string(tokens.size()) +
                                               " entries, manifest says " + std::to_string(vocab_size));
        }
        return Vectorizer(cfg, num_docs, std::move(tokens), std::move(df));
    }

private:
    VectorizerConfig config_;
    std::size_t num_docs_ = 0;
    std::vector<std::string> tokens_;
    std::vector<std::uint32_t> doc_freq_;
    std::unordered_map<std::string, index_t> index_;
};

inline Vectorizer fit_vocabulary(const Corpus& corpus, VectorizerConfig config) {
    return Vectorizer::fit(corpus, config);
}

}  // namespace pina_xmc
