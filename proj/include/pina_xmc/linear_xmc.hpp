#pragma once

// Recursive one-versus-all linear classifiers over a LabelTree.
//
// Layer t holds one weight vector per node at tree level t+1. The relevance
// of a node is the logistic squashing of its margin w^T x, and the score of a
// label is the product of these factors along its root-to-leaf path. Nodes
// that saw no positive instance during training are "degenerate": they keep
// an empty weight vector and contribute a fixed factor of 1e-9.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/cluster.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/parallel.hpp"
#include "pina_xmc/sparse.hpp"

namespace pina_xmc {

enum class Loss { squared_hinge, logistic };

inline std::string to_string(Loss loss) { return loss == Loss::squared_hinge ? "squared-hinge" : "logistic"; }

inline Loss parse_loss(std::string_view s) {
    if (s == "squared-hinge") return Loss::squared_hinge;
    if (s == "logistic") return Loss::logistic;
    throw Error(ErrorKind::invalid_argument, "unknown loss '" + std::string(s) + "'");
}

/// Objective per binary problem: lambda/2 ||w||^2 + sum_i loss(y_i w^T x_i).
struct TrainConfig {
    double lambda = 1.0;
    Loss loss = Loss::squared_hinge;
    double prune_threshold = 1e-4;
    double tolerance = 1e-3;
    std::size_t max_iterations = 100;
    std::uint64_t seed = 0;

    bool operator==(const TrainConfig&) const = default;

    void validate() const {
        if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "lambda must be positive");
        if (!(prune_threshold >= 0.0)) throw Error(ErrorKind::invalid_argument, "prune_threshold must be >= 0");
        if (!(tolerance > 0.0)) throw Error(ErrorKind::invalid_argument, "tolerance must be positive");
        if (max_iterations < 1) throw Error(ErrorKind::invalid_argument, "max_iterations must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"lambda", lambda},
                {"loss", to_string(loss)},
                {"prune_threshold", prune_threshold},
                {"tolerance", tolerance},
                {"max_iterations", max_iterations},
                {"seed", seed}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig cfg;
        try {
            cfg.lambda = j.at("lambda").get<double>();
            cfg.loss = parse_loss(j.at("loss").get<std::string>());
            cfg.prune_threshold = j.at("prune_threshold").get<double>();
            cfg.tolerance = j.at("tolerance").get<double>();
            cfg.max_iterations = j.at("max_iterations").get<std::size_t>();
            cfg.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::format, "train config: " + std::string(e.what()));
        }
        cfg.validate();
        return cfg;
    }
};

inline constexpr double kDegenerateScore = 1e-9;

inline double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
inline double logistic_loss(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

struct BinaryClassifier {
    SparseVector weights;
    /// Targets were all of one class.
    bool degenerate = false;
};

namespace detail {

inline std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    return order;
}

inline double dense_dot(const std::vector<double>& w, RowView x) {
    double s = 0.0;
    for (std::size_t p = 0; p < x.nnz(); ++p) s += w[x.indices[p]] * x.values[p];
    return s;
}

// Dual coordinate descent for the L2-regularized squared hinge loss
// (C = 1/lambda); stops when the projected-gradient spread drops below tol.
inline std::vector<double> solve_squared_hinge(const SparseMatrix& x, std::span<const index_t> rows,
                                               std::span<const std::int8_t> y, const TrainConfig& cfg,
                                               std::uint64_t seed) {
    const std::size_t n = rows.size();
    const double diag = 0.5 * cfg.lambda;
    std::vector<double> w(x.cols(), 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = squared_norm(x.row(rows[i])) + diag;
    std::mt19937_64 rng(seed);
    for (std::size_t epoch = 0; epoch < cfg.max_iterations; ++epoch) {
        double pg_max = -std::numeric_limits<double>::infinity();
        double pg_min = std::numeric_limits<double>::infinity();
        for (std::size_t i : shuffled(n, rng)) {
            const RowView xi = x.row(rows[i]);
            const double yi = y[i];
            const double g = yi * dense_dot(w, xi) - 1.0 + diag * alpha[i];
            const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (std::abs(pg) > 1e-12) {
                const double old = alpha[i];
                alpha[i] = std::max(alpha[i] - g / q[i], 0.0);
                const double delta = (alpha[i] - old) * yi;
                for (std::size_t p = 0; p < xi.nnz(); ++p) w[xi.indices[p]] += delta * xi.values[p];
            }
        }
        if (pg_max - pg_min <= cfg.tolerance) break;
    }
    return w;
}

// Primal coordinate descent with a one-dimensional Newton step and Armijo
// backtracking for the L2-regularized logistic loss.
inline std::vector<double> solve_logistic(const SparseMatrix& x, std::span<const index_t> rows,
                                          std::span<const std::int8_t> y, const TrainConfig& cfg,
                                          std::uint64_t seed) {
    const SparseMatrix cols = transpose(select_rows(x, rows));
    std::vector<double> w(x.cols(), 0.0);
    std::vector<double> margin(rows.size(), 0.0);  // w^T x_i
    std::vector<index_t> active;
    for (std::size_t j = 0; j < cols.rows(); ++j) {
        if (cols.row(j).nnz() > 0) active.push_back(static_cast<index_t>(j));
    }
    std::mt19937_64 rng(seed);
    for (std::size_t epoch = 0; epoch < cfg.max_iterations; ++epoch) {
        double max_step = 0.0;
        for (std::size_t a : shuffled(active.size(), rng)) {
            const index_t j = active[a];
            const RowView col = cols.row(j);
            double g = cfg.lambda * w[j];
            double h = cfg.lambda;
            double f0 = 0.5 * cfg.lambda * w[j] * w[j];
            for (std::size_t p = 0; p < col.nnz(); ++p) {
                const index_t i = col.indices[p];
                const double m = y[i] * margin[i];
                const double s = logistic(-m);
                g -= s * y[i] * col.values[p];
                h += s * (1.0 - s) * col.values[p] * col.values[p];
                f0 += logistic_loss(m);
            }
            const double d = -g / h;
            double beta = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls) {
                const double wj = w[j] + beta * d;
                double f1 = 0.5 * cfg.lambda * wj * wj;
                for (std::size_t p = 0; p < col.nnz(); ++p) {
                    const index_t i = col.indices[p];
                    f1 += logistic_loss(y[i] * (margin[i] + beta * d * col.values[p]));
                }
                if (f1 - f0 <= 0.01 * beta * d * g) {
                    accepted = true;
                    break;
                }
                beta *= 0.5;
            }
            if (!accepted) continue;
            const double step = beta * d;
            w[j] += step;
            for (std::size_t p = 0; p < col.nnz(); ++p) margin[col.indices[p]] += step * col.values[p];
            max_step = std::max(max_step, std::abs(step));
        }
        if (max_step < cfg.tolerance) break;
    }
    return w;
}

inline SparseVector prune(const std::vector<double>& w, double threshold) {
    SparseVector out(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (std::abs(w[j]) < threshold) continue;
        const auto v = static_cast<float>(w[j]);
        if (v != 0.0f) {
            out.indices.push_back(static_cast<index_t>(j));
            out.values.push_back(v);
        }
    }
    return out;
}

}  // namespace detail

/// Trains one binary classifier on rows[i] of x with targets y[i] in {-1,+1}.
inline BinaryClassifier train_binary_classifier(const SparseMatrix& x, std::span<const index_t> rows,
                                                std::span<const std::int8_t> y, const TrainConfig& cfg,
                                                std::uint64_t seed) {
    if (rows.size() != y.size()) {
        throw Error(ErrorKind::shape_mismatch, std::to_string(rows.size()) + " rows but " +
                                                   std::to_string(y.size()) + " targets");
    }
    if (rows.empty()) throw Error(ErrorKind::invalid_argument, "binary classifier needs at least one sample");
    bool pos = false;
    bool neg = false;
    for (auto t : y) {
        if (t != 1 && t != -1) throw Error(ErrorKind::invalid_argument, "targets must be +1 or -1");
        (t > 0 ? pos : neg) = true;
    }
    const auto w = cfg.loss == Loss::squared_hinge ? detail::solve_squared_hinge(x, rows, y, cfg, seed)
                                                   : detail::solve_logistic(x, rows, y, cfg, seed);
    return {detail::prune(w, cfg.prune_threshold), !(pos && neg)};
}

/// Convenience overload over a materialized sub-matrix.
inline BinaryClassifier train_binary_classifier(const SparseMatrix& x_sub, std::span<const std::int8_t> y,
                                                const TrainConfig& cfg) {
    std::vector<index_t> rows(x_sub.rows());
    std::iota(rows.begin(), rows.end(), index_t{0});
    return train_binary_classifier(x_sub, rows, y, cfg, cfg.seed);
}

struct ScoredLabel {
    index_t label;
    double score;
    bool operator==(const ScoredLabel&) const = default;
};

/// Sorted by (score desc, label asc).
using ScoredLabels = std::vector<ScoredLabel>;

inline bool ranks_before(const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
}

/// Per-instance node memberships at every tree level: result[t] is N x
/// width(t), with result[depth+1] == y.
inline std::vector<SparseMatrix> level_memberships(const SparseMatrix& y, const LabelTree& tree) {
    const std::size_t levels = tree.depth() + 2;
    std::vector<SparseMatrix> out(levels);
    out[levels - 1] = y;
    for (std::size_t t = levels - 1; t-- > 0;) {
        const SparseMatrix& below = out[t + 1];
        const auto& parent = tree.parents[t];
        std::vector<SparseVector> rows(y.rows());
        for (std::size_t i = 0; i < y.rows(); ++i) {
            std::vector<index_t> ids;
            for (index_t c : below.row(i).indices) ids.push_back(parent[c]);
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            rows[i] = SparseVector(tree.width(t));
            rows[i].indices = ids;
            rows[i].values.assign(ids.size(), 1.0f);
        }
        out[t] = from_rows(rows, tree.width(t));
    }
    return out;
}

/// Training rows and targets for one OVA column.
struct CandidateSet {
    std::vector<index_t> rows;
    std::vector<std::int8_t> targets;

    std::size_t positives() const { return static_cast<std::size_t>(std::count(targets.begin(), targets.end(), 1)); }
};

/// Teacher-forced candidate sets for every column of layer t. Layer 0 trains
/// on all instances; deeper layers train a node only on instances whose
/// labels fall under its parent, positive when they also fall under the node.
inline std::vector<CandidateSet> training_candidates(const std::vector<SparseMatrix>& memberships,
                                                     const LabelTree& tree, std::size_t layer) {
    const SparseMatrix& child_level = memberships[layer + 1];
    const std::size_t n = child_level.rows();
    const std::size_t width = tree.width(layer + 1);
    std::vector<CandidateSet> sets(width);
    std::vector<std::vector<index_t>> parent_rows(tree.width(layer));
    if (layer == 0) {
        parent_rows[0].resize(n);
        std::iota(parent_rows[0].begin(), parent_rows[0].end(), index_t{0});
    } else {
        const SparseMatrix by_node = transpose(memberships[layer]);
        for (std::size_t p = 0; p < by_node.rows(); ++p) {
            const RowView r = by_node.row(p);
            parent_rows[p].assign(r.indices.begin(), r.indices.end());
        }
    }
    for (std::size_t c = 0; c < width; ++c) {
        auto& set = sets[c];
        set.rows = parent_rows[tree.parents[layer][c]];
        set.targets.reserve(set.rows.size());
        for (index_t i : set.rows) set.targets.push_back(child_level.at(i, c) != 0.0f ? 1 : -1);
    }
    return sets;
}

class XmcModel {
public:
    XmcModel() = default;

    /// weight_rows[t] is width(t+1) x feature_dim (one weight vector per row).
    XmcModel(LabelTree tree, std::vector<SparseMatrix> weight_rows, std::vector<std::vector<std::uint8_t>> degenerate,
             std::size_t feature_dim, TrainConfig config)
        : tree_(std::move(tree)),
          weights_(std::move(weight_rows)),
          degenerate_(std::move(degenerate)),
          feature_dim_(feature_dim),
          config_(config) {
        tree_.validate();
        if (weights_.size() != tree_.depth() + 1 || degenerate_.size() != weights_.size()) {
            throw Error(ErrorKind::format, "model has " + std::to_string(weights_.size()) + " layers, tree needs " +
                                               std::to_string(tree_.depth() + 1));
        }
        for (std::size_t t = 0; t < weights_.size(); ++t) {
            if (weights_[t].rows() != tree_.width(t + 1) || weights_[t].cols() != feature_dim_ ||
                degenerate_[t].size() != weights_[t].rows()) {
                throw Error(ErrorKind::shape_mismatch, "layer " + std::to_string(t) + " is " +
                                                           shape_str(weights_[t].cols(), weights_[t].rows()) +
                                                           ", expected " +
                                                           shape_str(feature_dim_, tree_.width(t + 1)));
            }
            for (std::size_t c = 0; c < weights_[t].rows(); ++c) {
                if (degenerate_[t][c] && weights_[t].row(c).nnz() > 0) {
                    throw Error(ErrorKind::format, "degenerate column with stored weights");
                }
            }
        }
        for (std::size_t t = 0; t <= tree_.depth(); ++t) children_.push_back(tree_.children(t));
    }

    const LabelTree& tree() const { return tree_; }
    const TrainConfig& config() const { return config_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::size_t num_labels() const { return tree_.num_labels(); }
    std::size_t num_layers() const { return weights_.size(); }

    /// Layer t as a feature_dim x width(t+1) matrix (columns are classifiers).
    SparseMatrix layer(std::size_t t) const { return transpose(weights_[t]); }
    const SparseMatrix& layer_rows(std::size_t t) const { return weights_[t]; }
    bool is_degenerate(std::size_t t, std::size_t c) const { return degenerate_[t][c] != 0; }
    const std::vector<std::vector<index_t>>& children(std::size_t t) const { return children_[t]; }

    /// Multiplicative path factor of node c (at level t+1) for input x.
    double node_factor(std::size_t t, std::size_t c, const SparseVector& x) const {
        if (degenerate_[t][c]) return kDegenerateScore;
        return logistic(row_dot(weights_[t].row(c), x.view()));
    }

    void check_input(const SparseVector& x) const {
        if (x.dim != feature_dim_) {
            throw Error(ErrorKind::shape_mismatch,
                        "input dim " + std::to_string(x.dim) + " != model feature dim " + std::to_string(feature_dim_));
        }
    }

    bool operator==(const XmcModel& o) const {
        return tree_ == o.tree_ && weights_ == o.weights_ && degenerate_ == o.degenerate_ &&
               feature_dim_ == o.feature_dim_ && config_ == o.config_;
    }

private:
    LabelTree tree_;
    std::vector<SparseMatrix> weights_;
    std::vector<std::vector<std::uint8_t>> degenerate_;
    std::size_t feature_dim_ = 0;
    TrainConfig config_;
    std::vector<std::vector<std::vector<index_t>>> children_;
};

inline XmcModel train(const SparseMatrix& x, const SparseMatrix& y, const LabelTree& tree, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows() != y.rows()) {
        throw Error(ErrorKind::shape_mismatch, "features have " + std::to_string(x.rows()) + " rows, labels have " +
                                                   std::to_string(y.rows()));
    }
    if (y.cols() != tree.num_labels()) {
        throw Error(ErrorKind::shape_mismatch, "label matrix has " + std::to_string(y.cols()) +
                                                   " columns, tree has " + std::to_string(tree.num_labels()) +
                                                   " labels");
    }
    require_binary(y, "label matrix");
    const auto memberships = level_memberships(y, tree);
    std::vector<SparseMatrix> layers;
    std::vector<std::vector<std::uint8_t>> degenerate;
    for (std::size_t t = 0; t <= tree.depth(); ++t) {
        const auto sets = training_candidates(memberships, tree, t);
        std::vector<SparseVector> rows(sets.size());
        std::vector<std::uint8_t> flags(sets.size(), 0);
        parallel_for(sets.size(), [&](std::size_t c) {
            rows[c] = SparseVector(x.cols());
            if (sets[c].positives() == 0) {
                flags[c] = 1;
                return;
            }
            rows[c] = train_binary_classifier(x, sets[c].rows, sets[c].targets, cfg, mix_seed(cfg.seed, t, c)).weights;
        });
        layers.push_back(from_rows(rows, x.cols()));
        degenerate.push_back(std::move(flags));
    }
    return XmcModel(tree, std::move(layers), std::move(degenerate), x.cols(), cfg);
}

namespace detail {
inline void keep_best(std::vector<ScoredLabel>& nodes, std::size_t keep) {
    std::sort(nodes.begin(), nodes.end(), ranks_before);
    if (nodes.size() > keep) nodes.resize(keep);
}
}  // namespace detail

/// Beam search from the root: at every internal level only the `beam` best
/// nodes by path score are expanded.
inline ScoredLabels predict(const XmcModel& model, const SparseVector& x, std::size_t beam, std::size_t topk) {
    model.check_input(x);
    if (beam < 1 || topk < 1) throw Error(ErrorKind::invalid_argument, "beam and topk must be >= 1");
    std::vector<ScoredLabel> frontier{{0, 1.0}};
    const std::size_t depth = model.tree().depth();
    for (std::size_t t = 0; t <= depth; ++t) {
        std::vector<ScoredLabel> next;
        for (const auto& node : frontier) {
            for (index_t c : model.children(t)[node.label]) {
                next.push_back({c, node.score * model.node_factor(t, c, x)});
            }
        }
        detail::keep_best(next, t < depth ? beam : topk);
        frontier = std::move(next);
    }
    return frontier;
}

/// Scores every label by its full path product; the O(L) reference.
inline ScoredLabels predict_exhaustive(const XmcModel& model, const SparseVector& x, std::size_t topk) {
    model.check_input(x);
    if (topk < 1) throw Error(ErrorKind::invalid_argument, "topk must be >= 1");
    std::vector<double> scores{1.0};
    for (std::size_t t = 0; t <= model.tree().depth(); ++t) {
        const auto& parent = model.tree().parents[t];
        std::vector<double> next(parent.size());
        for (std::size_t c = 0; c < parent.size(); ++c) next[c] = scores[parent[c]] * model.node_factor(t, c, x);
        scores = std::move(next);
    }
    ScoredLabels out;
    out.reserve(scores.size());
    for (std::size_t l = 0; l < scores.size(); ++l) out.push_back({static_cast<index_t>(l), scores[l]});
    detail::keep_best(out, topk);
    return out;
}

inline std::vector<ScoredLabels> predict_batch(const XmcModel& model, const SparseMatrix& x, std::size_t beam,
                                               std::size_t topk) {
    std::vector<ScoredLabels> out(x.rows());
    parallel_for(x.rows(), [&](std::size_t i) { out[i] = predict(model, x.row_vector(i), beam, topk); });
    return out;
}

/// Packs ranked predictions into an N x num_labels score matrix.
inline SparseMatrix to_score_matrix(const std::vector<ScoredLabels>& preds, std::size_t num_labels) {
    std::vector<SparseVector> rows;
    rows.reserve(preds.size());
    for (const auto& p : preds) {
        std::vector<std::pair<index_t, double>> pairs;
        for (const auto& s : p) pairs.emplace_back(s.label, s.score);
        rows.push_back(SparseVector::from_pairs(num_labels, std::move(pairs)));
    }
    return from_rows(rows, num_labels);
}

/// Inverse of to_score_matrix: each row ranked by (score desc, label asc).
inline std::vector<ScoredLabels> from_score_matrix(const SparseMatrix& scores) {
    std::vector<ScoredLabels> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const RowView r = scores.row(i);
        for (std::size_t p = 0; p < r.nnz(); ++p) out[i].push_back({r.indices[p], r.values[p]});
        std::sort(out[i].begin(), out[i].end(), ranks_before);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model directory: manifest.json, layer_<t>.xmcm (feature_dim x width) and
// tree_level_<t>.bin.

inline constexpr int kModelFormatVersion = 1;

inline void save_model(const XmcModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::vector<std::size_t>> degenerate(model.num_layers());
    for (std::size_t t = 0; t < model.num_layers(); ++t) {
        for (std::size_t c = 0; c < model.layer_rows(t).rows(); ++c) {
            if (model.is_degenerate(t, c)) degenerate[t].push_back(c);
        }
        save_matrix(dir / ("layer_" + std::to_string(t) + ".xmcm"), model.layer(t));
    }
    model.tree().save(dir);
    nlohmann::json manifest = {{"format", "pina-xmc-model"},
                               {"format_version", kModelFormatVersion},
                               {"feature_dim", model.feature_dim()},
                               {"num_labels", model.num_labels()},
                               {"tree", model.tree().manifest()},
                               {"config", model.config().to_json()},
                               {"degenerate", degenerate}};
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline XmcModel load_model(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorKind::io, "missing model manifest: " + manifest_path.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "pina-xmc-model") {
        throw Error(ErrorKind::format, manifest_path.string() + " is not a model manifest");
    }
    const int version = manifest.value("format_version", -1);
    if (version != kModelFormatVersion) {
        throw Error(ErrorKind::format, "unsupported model format version " + std::to_string(version));
    }
    std::size_t feature_dim = 0;
    std::vector<std::vector<std::size_t>> degenerate_ids;
    TrainConfig cfg;
    try {
        feature_dim = manifest.at("feature_dim").get<std::size_t>();
        degenerate_ids = manifest.at("degenerate").get<std::vector<std::vector<std::size_t>>>();
        cfg = TrainConfig::from_json(manifest.at("config"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, manifest_path.string() + ": " + e.what());
    }
    LabelTree tree = LabelTree::load(dir, manifest.at("tree"));
    std::vector<SparseMatrix> layers;
    std::vector<std::vector<std::uint8_t>> degenerate;
    for (std::size_t t = 0; t <= tree.depth(); ++t) {
        const auto path = dir / ("layer_" + std::to_string(t) + ".xmcm");
        if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing model file: " + path.string());
        layers.push_back(transpose(load_matrix(path)));
        std::vector<std::uint8_t> flags(layers.back().rows(), 0);
        if (t < degenerate_ids.size()) {
            for (auto c : degenerate_ids[t]) {
                if (c >= flags.size()) throw Error(ErrorKind::format, "degenerate column id out of range");
                flags[c] = 1;
            }
        }
        degenerate.push_back(std::move(flags));
    }
    return XmcModel(std::move(tree), std::move(layers), std::move(degenerate), feature_dim, cfg);
}

}  // namespace pina_xmc
