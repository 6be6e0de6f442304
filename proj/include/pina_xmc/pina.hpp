#pragma once

// Neighbor-predictor pretraining and neighborhood feature augmentation.
//
// Stage one turns the training data into a second XMC problem whose inputs
// are instance texts and label texts and whose outputs are label and
// instance nodes (the pretraining biadjacency), then trains a neighbor
// predictor on it. Stage two asks that predictor for the top-K output nodes
// of any text and appends the normalized, score-weighted average of those
// nodes' embeddings to the text's own embedding.
//
// Output node ids: j < n_labels is label j, j >= n_labels is instance
// j - n_labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/cluster.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/linear_xmc.hpp"
#include "pina_xmc/parallel.hpp"
#include "pina_xmc/sparse.hpp"
#include "pina_xmc/textvec.hpp"

namespace pina_xmc {

enum class PretrainMode { label_text, i2i, naive };

inline std::string to_string(PretrainMode mode) {
    switch (mode) {
        case PretrainMode::label_text: return "label-text";
        case PretrainMode::i2i: return "i2i";
        case PretrainMode::naive: return "naive-B";
    }
    return "unknown";
}

inline PretrainMode parse_pretrain_mode(std::string_view s) {
    if (s == "label-text") return PretrainMode::label_text;
    if (s == "i2i") return PretrainMode::i2i;
    if (s == "naive-B") return PretrainMode::naive;
    throw Error(ErrorKind::invalid_argument, "unknown pretraining mode '" + std::string(s) + "'");
}

struct PretrainingTask {
    /// Rows are pretraining inputs (corpus_pre order), columns output nodes.
    SparseMatrix b_pre;
    Corpus corpus_pre;
    /// Text of every output node, in node order.
    Corpus node_texts;
    std::size_t n_instances = 0;
    std::size_t n_labels = 0;
    PretrainMode mode = PretrainMode::label_text;

    /// Row of corpus_pre holding the same text as output node j, if any.
    std::optional<std::size_t> input_row_of_node(std::size_t j) const {
        switch (mode) {
            case PretrainMode::label_text: return j < n_labels ? n_instances + j : j - n_labels;
            case PretrainMode::i2i: return j;
            case PretrainMode::naive: return std::nullopt;
        }
        return std::nullopt;
    }

    void validate() const {
        if (b_pre.rows() != corpus_pre.size() || b_pre.cols() != node_texts.size()) {
            throw Error(ErrorKind::shape_mismatch,
                        "pretraining matrix is " + shape_str(b_pre.rows(), b_pre.cols()) + " but there are " +
                            std::to_string(corpus_pre.size()) + " inputs and " + std::to_string(node_texts.size()) +
                            " output nodes");
        }
        require_binary(b_pre, "pretraining matrix");
    }
};

/// B_pre = [[B, I], [I, B^T]] over inputs (instances ++ labels) and output
/// nodes (labels ++ instances).
inline PretrainingTask build_pretraining_task(const Corpus& instances, const Corpus& labels, const SparseMatrix& y) {
    if (y.rows() != instances.size() || y.cols() != labels.size()) {
        throw Error(ErrorKind::shape_mismatch, "label matrix is " + shape_str(y.rows(), y.cols()) + ", expected " +
                                                   shape_str(instances.size(), labels.size()));
    }
    require_binary(y, "label matrix");
    PretrainingTask task;
    task.n_instances = instances.size();
    task.n_labels = labels.size();
    task.mode = PretrainMode::label_text;
    task.b_pre = block_2x2(y, identity(instances.size()), identity(labels.size()), transpose(y));
    task.corpus_pre = instances;
    task.corpus_pre.insert(task.corpus_pre.end(), labels.begin(), labels.end());
    task.node_texts = labels;
    task.node_texts.insert(task.node_texts.end(), instances.begin(), instances.end());
    return task;
}

/// Ablation target: the plain instance-to-label matrix. Label text is only
/// used for the output-node embeddings, never as a pretraining input.
inline PretrainingTask build_naive_pretraining_task(const Corpus& instances, const Corpus& labels,
                                                    const SparseMatrix& y) {
    if (y.rows() != instances.size() || y.cols() != labels.size()) {
        throw Error(ErrorKind::shape_mismatch, "label matrix is " + shape_str(y.rows(), y.cols()) + ", expected " +
                                                   shape_str(instances.size(), labels.size()));
    }
    require_binary(y, "label matrix");
    PretrainingTask task;
    task.n_instances = instances.size();
    task.n_labels = labels.size();
    task.mode = PretrainMode::naive;
    task.b_pre = y;
    task.corpus_pre = instances;
    task.node_texts = labels;
    return task;
}

/// Instance-to-instance graph used directly as the pretraining target.
inline PretrainingTask build_i2i_pretraining_task(const SparseMatrix& corr, const Corpus& texts) {
    if (corr.rows() != texts.size() || corr.cols() != texts.size()) {
        throw Error(ErrorKind::shape_mismatch, "correlation graph is " + shape_str(corr.rows(), corr.cols()) +
                                                   " but there are " + std::to_string(texts.size()) + " texts");
    }
    PretrainingTask task;
    task.n_instances = texts.size();
    task.n_labels = 0;
    task.mode = PretrainMode::i2i;
    task.b_pre = corr;
    task.corpus_pre = texts;
    task.node_texts = texts;
    task.validate();
    return task;
}

/// Binary graph with an edge wherever the correlation signal exceeds tau.
inline SparseMatrix threshold_correlation(const SparseMatrix& weighted, double tau) {
    std::vector<SparseVector> rows(weighted.rows());
    for (std::size_t i = 0; i < weighted.rows(); ++i) {
        const RowView r = weighted.row(i);
        rows[i] = SparseVector(weighted.cols());
        for (std::size_t p = 0; p < r.nnz(); ++p) {
            if (r.values[p] > tau) {
                rows[i].indices.push_back(r.indices[p]);
                rows[i].values.push_back(1.0f);
            }
        }
    }
    return from_rows(rows, weighted.cols());
}

/// Row-major f32 table; on disk it is the raw little-endian values.
struct DenseTable {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    std::span<const float> row(std::size_t i) const { return std::span<const float>(data).subspan(i * dim, dim); }
    bool operator==(const DenseTable&) const = default;

    static DenseTable load(const std::filesystem::path& path, std::size_t dim) {
        if (dim == 0) throw Error(ErrorKind::invalid_argument, "dense embedding dim must be positive");
        if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing dense table: " + path.string());
        const auto bytes = std::filesystem::file_size(path);
        if (bytes % (4 * dim) != 0) {
            throw Error(ErrorKind::format, path.string() + ": size is not a multiple of 4*" + std::to_string(dim));
        }
        DenseTable t;
        t.dim = dim;
        t.rows = bytes / (4 * dim);
        t.data.resize(t.rows * dim);
        auto is = io::open_in(path);
        for (auto& v : t.data) v = io::read_f32(is, path.string());
        return t;
    }

    void save(const std::filesystem::path& path) const {
        auto os = io::open_out(path);
        for (float v : data) io::write_f32(os, v);
    }
};

/// Embedding used for aggregation: [dense ; statistical]. The dense part is
/// optional and supplied externally, row-aligned with the pretraining inputs.
struct EmbedderStack {
    Vectorizer statistical;
    std::optional<DenseTable> dense;

    std::size_t dense_dim() const { return dense ? dense->dim : 0; }
    std::size_t dim() const { return dense_dim() + statistical.dim(); }

    SparseVector embed(std::string_view text, std::span<const float> dense_row = {}) const {
        const SparseVector stat = statistical.transform(text);
        const std::size_t dd = dense_dim();
        if (!dense_row.empty() && dense_row.size() != dd) {
            throw Error(ErrorKind::shape_mismatch, "dense row has " + std::to_string(dense_row.size()) +
                                                       " values, embedder expects " + std::to_string(dd));
        }
        SparseVector out(dim());
        for (std::size_t j = 0; j < dense_row.size(); ++j) {
            if (dense_row[j] != 0.0f) {
                out.indices.push_back(static_cast<index_t>(j));
                out.values.push_back(dense_row[j]);
            }
        }
        for (std::size_t p = 0; p < stat.nnz(); ++p) {
            out.indices.push_back(static_cast<index_t>(stat.indices[p] + dd));
            out.values.push_back(stat.values[p]);
        }
        return out;
    }
};

struct Neighbor {
    index_t node;
    double weight;
    bool operator==(const Neighbor&) const = default;
};

/// At most K entries, descending weight, weights summing to 1.
using NeighborSet = std::vector<Neighbor>;

/// Keeps the K best-scored nodes (ties to the smaller id) and L1-normalizes
/// their scores. Scores at or below the degenerate floor count as zero.
inline NeighborSet neighbors_from_scores(ScoredLabels scores, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "neighbor count K must be >= 1");
    std::sort(scores.begin(), scores.end(), ranks_before);
    NeighborSet out;
    double total = 0.0;
    for (const auto& s : scores) {
        if (out.size() == k) break;
        if (!(s.score > kDegenerateScore)) continue;
        out.push_back({s.label, s.score});
        total += s.score;
    }
    for (auto& n : out) n.weight /= total;
    return out;
}

struct PredictorConfig {
    VectorizerConfig vectorizer;
    TreeConfig tree;
    TrainConfig train;
    std::size_t beam = 10;
};

class NeighborPredictor {
public:
    NeighborPredictor() = default;
    NeighborPredictor(XmcModel model, EmbedderStack embedder, SparseMatrix node_features, std::size_t n_instances,
                      std::size_t n_labels, PretrainMode mode, std::size_t beam)
        : model_(std::move(model)),
          embedder_(std::move(embedder)),
          node_features_(std::move(node_features)),
          n_instances_(n_instances),
          n_labels_(n_labels),
          mode_(mode),
          beam_(beam) {
        if (model_.feature_dim() != embedder_.statistical.dim()) {
            throw Error(ErrorKind::shape_mismatch, "model feature dim differs from vectorizer vocabulary");
        }
        if (node_features_.rows() != model_.num_labels() || node_features_.cols() != embedder_.dim()) {
            throw Error(ErrorKind::shape_mismatch,
                        "node feature table is " + shape_str(node_features_.rows(), node_features_.cols()) +
                            ", expected " + shape_str(model_.num_labels(), embedder_.dim()));
        }
    }

    const XmcModel& model() const { return model_; }
    const Vectorizer& vectorizer() const { return embedder_.statistical; }
    const EmbedderStack& embedder() const { return embedder_; }
    const SparseMatrix& node_features() const { return node_features_; }
    std::size_t num_nodes() const { return model_.num_labels(); }
    std::size_t n_instances() const { return n_instances_; }
    std::size_t n_labels() const { return n_labels_; }
    PretrainMode mode() const { return mode_; }
    std::size_t beam() const { return beam_; }
    /// Width of the aggregation embedding.
    std::size_t embedding_dim() const { return embedder_.dim(); }

    ScoredLabels scores(std::string_view text, std::size_t topk) const {
        return predict(model_, embedder_.statistical.transform(text), beam_, topk);
    }

    bool operator==(const NeighborPredictor& o) const {
        return model_ == o.model_ && embedder_.statistical == o.embedder_.statistical &&
               embedder_.dense == o.embedder_.dense && node_features_ == o.node_features_ &&
               n_instances_ == o.n_instances_ && n_labels_ == o.n_labels_ && mode_ == o.mode_ && beam_ == o.beam_;
    }

private:
    XmcModel model_;
    EmbedderStack embedder_;
    SparseMatrix node_features_;
    std::size_t n_instances_ = 0;
    std::size_t n_labels_ = 0;
    PretrainMode mode_ = PretrainMode::label_text;
    std::size_t beam_ = 10;
};

/// Fits the statistical vectorizer on the pretraining inputs, builds the
/// label tree over the output nodes, and trains the neighbor model.
inline NeighborPredictor train_neighbor_predictor(const PretrainingTask& task, const PredictorConfig& cfg,
                                                  std::optional<DenseTable> dense = std::nullopt) {
    task.validate();
    if (dense && dense->rows != task.corpus_pre.size()) {
        throw Error(ErrorKind::shape_mismatch, "dense table has " + std::to_string(dense->rows) +
                                                   " rows, pretraining corpus has " +
                                                   std::to_string(task.corpus_pre.size()));
    }
    Vectorizer vec = Vectorizer::fit(task.corpus_pre, cfg.vectorizer);
    const SparseMatrix x = vec.transform_corpus(task.corpus_pre);
    const SparseMatrix z = pifa_label_embeddings(task.b_pre, x);
    const LabelTree tree = build_label_tree(z, cfg.tree, cfg.train.seed);
    XmcModel model = train(x, task.b_pre, tree, cfg.train);

    EmbedderStack embedder{std::move(vec), std::move(dense)};
    std::vector<SparseVector> node_rows(task.node_texts.size());
    parallel_for(node_rows.size(), [&](std::size_t j) {
        std::span<const float> dense_row;
        if (embedder.dense) {
            if (auto r = task.input_row_of_node(j)) dense_row = embedder.dense->row(*r);
        }
        if (embedder.dense && dense_row.empty()) {
            std::vector<float> zeros(embedder.dense_dim(), 0.0f);
            node_rows[j] = embedder.embed(task.node_texts[j], zeros);
        } else {
            node_rows[j] = embedder.embed(task.node_texts[j], dense_row);
        }
    });
    SparseMatrix node_features = from_rows(node_rows, embedder.dim());
    return NeighborPredictor(std::move(model), std::move(embedder), std::move(node_features), task.n_instances,
                             task.n_labels, task.mode, cfg.beam);
}

inline NeighborSet predict_neighbors(const NeighborPredictor& g, std::string_view text, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "neighbor count K must be >= 1");
    return neighbors_from_scores(g.scores(text, k), k);
}

/// Ego block, aggregated neighbor block, each L2-normalized (zero blocks stay
/// zero), concatenated and renormalized.
inline SparseVector aggregate_row(const SparseVector& ego, const NeighborSet& neighbors,
                                  const SparseMatrix& node_features) {
    const std::size_t d = ego.dim;
    std::vector<std::pair<index_t, double>> agg_pairs;
    for (const auto& n : neighbors) {
        const RowView r = node_features.row(n.node);
        for (std::size_t p = 0; p < r.nnz(); ++p) agg_pairs.emplace_back(r.indices[p], n.weight * r.values[p]);
    }
    std::stable_sort(agg_pairs.begin(), agg_pairs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<index_t, double>> agg;
    for (const auto& [j, v] : agg_pairs) {
        if (!agg.empty() && agg.back().first == j) {
            agg.back().second += v;
        } else {
            agg.emplace_back(j, v);
        }
    }
    double ego_sq = 0.0;
    for (float v : ego.values) ego_sq += static_cast<double>(v) * v;
    double agg_sq = 0.0;
    for (const auto& [j, v] : agg) agg_sq += v * v;
    const double ego_norm = std::sqrt(ego_sq);
    const double agg_norm = std::sqrt(agg_sq);
    const double ego_part = ego_norm > 0.0 ? 1.0 : 0.0;
    const double agg_part = agg_norm > 0.0 ? 1.0 : 0.0;
    const double total = std::sqrt(ego_part + agg_part);

    SparseVector out(2 * d);
    if (total == 0.0) return out;
    for (std::size_t p = 0; p < ego.nnz(); ++p) {
        const auto v = static_cast<float>(ego.values[p] / ego_norm / total);
        if (v != 0.0f) {
            out.indices.push_back(ego.indices[p]);
            out.values.push_back(v);
        }
    }
    for (const auto& [j, value] : agg) {
        const auto v = static_cast<float>(value / agg_norm / total);
        if (v != 0.0f) {
            out.indices.push_back(static_cast<index_t>(j + d));
            out.values.push_back(v);
        }
    }
    return out;
}

/// Augmented features for arbitrary texts. Takes only texts (plus optional
/// dense rows for them), so training and unseen inputs share one code path.
inline SparseMatrix augment(const NeighborPredictor& g, const Corpus& texts, std::size_t k,
                            const DenseTable* text_dense = nullptr) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "neighbor count K must be >= 1");
    if (g.embedder().dense && (!text_dense || text_dense->rows != texts.size())) {
        throw Error(ErrorKind::invalid_argument, "predictor uses dense embeddings; supply one dense row per text");
    }
    std::vector<SparseVector> rows(texts.size());
    parallel_for(texts.size(), [&](std::size_t i) {
        std::span<const float> dense_row;
        if (g.embedder().dense) dense_row = text_dense->row(i);
        const SparseVector ego = g.embedder().embed(texts[i], dense_row);
        rows[i] = aggregate_row(ego, predict_neighbors(g, texts[i], k), g.node_features());
    });
    return from_rows(rows, 2 * g.embedding_dim());
}

enum class FeatureComposition { augmented_only, concatenated };

inline std::string to_string(FeatureComposition c) {
    return c == FeatureComposition::augmented_only ? "augmented" : "concat";
}

inline FeatureComposition parse_feature_composition(std::string_view s) {
    if (s == "augmented") return FeatureComposition::augmented_only;
    if (s == "concat") return FeatureComposition::concatenated;
    throw Error(ErrorKind::invalid_argument, "unknown feature composition '" + std::string(s) + "'");
}

/// Downstream input: [augmented ; statistical] or the augmented block alone.
inline SparseMatrix downstream_features(const SparseMatrix& augmented, const SparseMatrix& statistical,
                                        FeatureComposition composition) {
    if (composition == FeatureComposition::augmented_only) return augmented;
    return hstack(augmented, statistical);
}

// ---------------------------------------------------------------------------
// Predictor directory: manifest.json, model/, vectorizer.{json,tsv},
// node_features.xmcm and, when present, dense.f32.

inline constexpr int kPredictorFormatVersion = 1;

inline void save_neighbor_predictor(const NeighborPredictor& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_model(g.model(), dir / "model");
    g.vectorizer().save(dir);
    save_matrix(dir / "node_features.xmcm", g.node_features());
    if (g.embedder().dense) g.embedder().dense->save(dir / "dense.f32");
    nlohmann::json manifest = {{"format", "pina-neighbor-predictor"},
                               {"format_version", kPredictorFormatVersion},
                               {"mode", to_string(g.mode())},
                               {"n_instances", g.n_instances()},
                               {"n_labels", g.n_labels()},
                               {"beam", g.beam()},
                               {"embedder", {{"statistical_dim", g.vectorizer().dim()},
                                             {"dense_dim", g.embedder().dense_dim()}}},
                               {"vectorizer", g.vectorizer().manifest()}};
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline NeighborPredictor load_neighbor_predictor(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing predictor manifest: " + path.string());
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
    if (m.value("format", "") != "pina-neighbor-predictor") {
        throw Error(ErrorKind::format, path.string() + " is not a neighbor predictor manifest");
    }
    if (m.value("format_version", -1) != kPredictorFormatVersion) {
        throw Error(ErrorKind::format, "unsupported predictor format version");
    }
    try {
        EmbedderStack embedder{Vectorizer::load(dir), std::nullopt};
        const auto dense_dim = m.at("embedder").at("dense_dim").get<std::size_t>();
        if (dense_dim > 0) embedder.dense = DenseTable::load(dir / "dense.f32", dense_dim);
        return NeighborPredictor(load_model(dir / "model"), std::move(embedder),
                                 load_matrix(dir / "node_features.xmcm"), m.at("n_instances").get<std::size_t>(),
                                 m.at("n_labels").get<std::size_t>(),
                                 parse_pretrain_mode(m.at("mode").get<std::string>()), m.at("beam").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
}

/// Order-independent fingerprint of every file under dir (hex FNV-1a).
inline std::string directory_fingerprint(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(std::filesystem::relative(entry.path(), dir));
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = io::fnv1a("");
    for (const auto& f : files) {
        h = io::fnv1a(f.generic_string(), h);
        h = io::fnv1a(io::read_file(dir / f), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pina_xmc
