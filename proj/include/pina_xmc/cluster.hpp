#pragma once

// Label embeddings from positive-instance feature sums, and the hierarchical
// label tree built by recursive balanced spherical k-means on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/parallel.hpp"
#include "pina_xmc/sparse.hpp"

namespace pina_xmc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline void require_binary(const SparseMatrix& y, const char* name) {
    for (float v : y.values()) {
        if (v != 1.0f) throw Error(ErrorKind::invalid_argument, std::string(name) + " must be a 0/1 matrix");
    }
}

/// Row l is the L2-normalized sum of the feature rows of the instances
/// positive for label l; labels without positives get a zero row.
inline SparseMatrix pifa_label_embeddings(const SparseMatrix& y, const SparseMatrix& x) {
    if (y.rows() != x.rows()) {
        throw Error(ErrorKind::shape_mismatch, "label matrix has " + std::to_string(y.rows()) +
                                                   " rows, feature matrix has " + std::to_string(x.rows()));
    }
    require_binary(y, "label matrix");
    const SparseMatrix yt = transpose(y);
    std::vector<SparseVector> rows(yt.rows());
    parallel_for(yt.rows(), [&](std::size_t l) {
        const RowView members = yt.row(l);
        std::vector<double> acc(x.cols(), 0.0);
        std::vector<index_t> touched;
        for (index_t i : members.indices) {
            const RowView r = x.row(i);
            for (std::size_t p = 0; p < r.nnz(); ++p) {
                if (acc[r.indices[p]] == 0.0) touched.push_back(r.indices[p]);
                acc[r.indices[p]] += r.values[p];
            }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        double sq = 0.0;
        for (index_t j : touched) sq += acc[j] * acc[j];
        SparseVector out(x.cols());
        if (sq > 0.0) {
            const double n = std::sqrt(sq);
            for (index_t j : touched) {
                const auto v = static_cast<float>(acc[j] / n);
                if (v != 0.0f) {
                    out.indices.push_back(j);
                    out.values.push_back(v);
                }
            }
        }
        rows[l] = std::move(out);
    });
    return from_rows(rows, x.cols());
}

struct KMeansOptions {
    std::size_t max_iterations = 20;
    double relative_tolerance = 1e-4;
};

namespace detail {

// Greedy balanced assignment: (point, cluster) pairs in descending
// similarity, each cluster capped so final sizes are floor(m/k) or
// ceil(m/k). Zero rows are placed afterwards, round-robin into whatever
// capacity remains.
inline std::vector<index_t> balanced_assign(const std::vector<std::vector<double>>& sim,
                                            const std::vector<index_t>& nonzero, const std::vector<index_t>& zero,
                                            std::size_t m, std::size_t k) {
    const std::size_t lo = m / k;
    const std::size_t hi = lo + (m % k == 0 ? 0 : 1);
    const std::size_t hi_slots = m % k;
    std::size_t hi_used = 0;
    std::vector<std::size_t> size(k, 0);
    auto has_room = [&](std::size_t c) {
        if (size[c] < lo) return true;
        return size[c] < hi && hi_used < hi_slots;
    };
    auto place = [&](std::size_t c) {
        ++size[c];
        if (hi_slots > 0 && size[c] == hi) ++hi_used;
    };

    constexpr index_t unassigned = static_cast<index_t>(-1);
    std::vector<index_t> assign(m, unassigned);
    struct Pair {
        double sim;
        index_t point;
        index_t cluster;
    };
    std::vector<Pair> pairs;
    pairs.reserve(nonzero.size() * k);
    for (std::size_t a = 0; a < nonzero.size(); ++a) {
        for (std::size_t c = 0; c < k; ++c) pairs.push_back({sim[a][c], nonzero[a], static_cast<index_t>(c)});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        if (a.point != b.point) return a.point < b.point;
        return a.cluster < b.cluster;
    });
    for (const auto& p : pairs) {
        if (assign[p.point] != unassigned || !has_room(p.cluster)) continue;
        assign[p.point] = p.cluster;
        place(p.cluster);
    }
    std::size_t cursor = 0;
    for (index_t i : zero) {
        while (!has_room(cursor % k)) ++cursor;
        assign[i] = static_cast<index_t>(cursor % k);
        place(cursor % k);
        ++cursor;
    }
    return assign;
}

// Renumbers clusters by first appearance so equal partitions compare equal.
inline void canonical_labels(std::vector<index_t>& assign, std::size_t k) {
    constexpr index_t none = static_cast<index_t>(-1);
    std::vector<index_t> remap(k, none);
    index_t next = 0;
    for (auto& a : assign) {
        if (remap[a] == none) remap[a] = next++;
        a = remap[a];
    }
}

}  // namespace detail

/// Balanced spherical k-means over the rows of `points` (unit norm or zero).
/// Returns a cluster id per row; sizes differ by at most one and ids are
/// numbered by first appearance.
inline std::vector<index_t> spherical_kmeans(const SparseMatrix& points, std::size_t k, std::uint64_t seed,
                                             const KMeansOptions& opts = {}) {
    const std::size_t m = points.rows();
    if (k < 2) throw Error(ErrorKind::invalid_argument, "k-means needs k >= 2");
    if (m < k) {
        throw Error(ErrorKind::invalid_argument,
                    "cannot split " + std::to_string(m) + " points into " + std::to_string(k) + " clusters");
    }
    std::vector<index_t> nonzero;
    std::vector<index_t> zero;
    for (std::size_t i = 0; i < m; ++i) (points.row(i).nnz() > 0 ? nonzero : zero).push_back(static_cast<index_t>(i));

    std::vector<index_t> assign(m);
    if (nonzero.empty()) {
        for (std::size_t i = 0; i < m; ++i) assign[i] = static_cast<index_t>(i % k);
        detail::canonical_labels(assign, k);
        return assign;
    }

    const std::size_t d = points.cols();
    std::vector<std::vector<double>> centroids(k, std::vector<double>(d, 0.0));
    auto sim_to = [&](index_t i, const std::vector<double>& c) {
        const RowView r = points.row(i);
        double s = 0.0;
        for (std::size_t p = 0; p < r.nnz(); ++p) s += r.values[p] * c[r.indices[p]];
        return s;
    };
    auto set_centroid = [&](std::size_t c, index_t i) {
        std::fill(centroids[c].begin(), centroids[c].end(), 0.0);
        const RowView r = points.row(i);
        for (std::size_t p = 0; p < r.nnz(); ++p) centroids[c][r.indices[p]] = r.values[p];
    };

    // Farthest-point initialization from a seeded first pick.
    std::vector<double> closest(nonzero.size(), -std::numeric_limits<double>::infinity());
    std::vector<bool> taken(nonzero.size(), false);
    std::size_t pick = static_cast<std::size_t>(splitmix64(seed) % nonzero.size());
    for (std::size_t c = 0; c < k && c < nonzero.size(); ++c) {
        set_centroid(c, nonzero[pick]);
        taken[pick] = true;
        std::size_t next = nonzero.size();
        for (std::size_t a = 0; a < nonzero.size(); ++a) {
            closest[a] = std::max(closest[a], sim_to(nonzero[a], centroids[c]));
            if (!taken[a] && (next == nonzero.size() || closest[a] < closest[next])) next = a;
        }
        if (next == nonzero.size()) break;
        pick = next;
    }

    std::vector<std::vector<double>> sim(nonzero.size(), std::vector<double>(k, 0.0));
    double prev_objective = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        for (std::size_t a = 0; a < nonzero.size(); ++a) {
            for (std::size_t c = 0; c < k; ++c) sim[a][c] = sim_to(nonzero[a], centroids[c]);
        }
        auto next_assign = detail::balanced_assign(sim, nonzero, zero, m, k);
        double objective = 0.0;
        for (std::size_t a = 0; a < nonzero.size(); ++a) objective += sim[a][next_assign[nonzero[a]]];
        const bool same = iter > 0 && next_assign == assign;
        assign = std::move(next_assign);
        if (same || (iter > 0 && std::abs(objective - prev_objective) <=
                                     opts.relative_tolerance * std::max(std::abs(prev_objective), 1e-12))) {
            break;
        }
        prev_objective = objective;

        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        for (index_t i : nonzero) {
            const RowView r = points.row(i);
            for (std::size_t p = 0; p < r.nnz(); ++p) sums[assign[i]][r.indices[p]] += r.values[p];
        }
        for (std::size_t c = 0; c < k; ++c) {
            double sq = 0.0;
            for (double v : sums[c]) sq += v * v;
            if (sq == 0.0) continue;
            const double n = std::sqrt(sq);
            for (std::size_t j = 0; j < d; ++j) centroids[c][j] = sums[c][j] / n;
        }
    }
    detail::canonical_labels(assign, k);
    return assign;
}

/// Levels of a label tree. parents[t][c] is the parent (a node at level t)
/// of node c at level t+1; level 0 is the root and the last entry maps
/// labels to leaf clusters, so depth() == parents.size() - 1.
struct LabelTree {
    std::size_t branching = 2;
    std::vector<std::vector<index_t>> parents;

    std::size_t depth() const { return parents.size() - 1; }
    std::size_t num_labels() const { return parents.back().size(); }
    /// Number of nodes at level t, t in [0, depth()+1].
    std::size_t width(std::size_t t) const { return t == 0 ? 1 : parents[t - 1].size(); }

    /// children[p] for every node p at level t, ascending.
    std::vector<std::vector<index_t>> children(std::size_t t) const {
        std::vector<std::vector<index_t>> out(width(t));
        for (std::size_t c = 0; c < parents[t].size(); ++c) out[parents[t][c]].push_back(static_cast<index_t>(c));
        return out;
    }

    /// Labels grouped by leaf cluster (nodes at level depth()).
    std::vector<std::vector<index_t>> leaves() const { return children(depth()); }

    std::size_t max_width() const {
        std::size_t w = 1;
        for (const auto& p : parents) w = std::max(w, p.size());
        return w;
    }

    bool operator==(const LabelTree&) const = default;

    void validate() const {
        if (parents.empty()) throw Error(ErrorKind::format, "label tree has no levels");
        for (std::size_t t = 0; t < parents.size(); ++t) {
            const std::size_t parent_width = width(t);
            std::vector<bool> has_child(parent_width, false);
            for (index_t p : parents[t]) {
                if (p >= parent_width) {
                    throw Error(ErrorKind::format, "tree level " + std::to_string(t) + " references parent " +
                                                       std::to_string(p) + " >= " + std::to_string(parent_width));
                }
                has_child[p] = true;
            }
            if (!parents[t].empty() &&
                std::find(has_child.begin(), has_child.end(), false) != has_child.end()) {
                throw Error(ErrorKind::format, "tree level " + std::to_string(t) + " has a childless node");
            }
        }
    }

    nlohmann::json manifest() const {
        std::vector<std::size_t> sizes;
        for (const auto& p : parents) sizes.push_back(p.size());
        return {{"branching", branching}, {"depth", depth()}, {"sizes", sizes}};
    }

    void save(const std::filesystem::path& dir) const {
        for (std::size_t t = 0; t < parents.size(); ++t) {
            auto os = io::open_out(dir / ("tree_level_" + std::to_string(t) + ".bin"));
            for (index_t p : parents[t]) io::write_le<std::uint32_t>(os, p);
        }
    }

    static LabelTree load(const std::filesystem::path& dir, const nlohmann::json& manifest) {
        LabelTree tree;
        std::vector<std::size_t> sizes;
        std::size_t depth = 0;
        try {
            tree.branching = manifest.at("branching").get<std::size_t>();
            depth = manifest.at("depth").get<std::size_t>();
            sizes = manifest.at("sizes").get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::format, "tree manifest: " + std::string(e.what()));
        }
        if (sizes.size() != depth + 1) throw Error(ErrorKind::format, "tree manifest sizes do not match depth");
        for (std::size_t t = 0; t <= depth; ++t) {
            const auto path = dir / ("tree_level_" + std::to_string(t) + ".bin");
            if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing tree file: " + path.string());
            if (std::filesystem::file_size(path) != sizes[t] * 4) {
                throw Error(ErrorKind::format, path.string() + ": size does not match manifest");
            }
            auto is = io::open_in(path);
            std::vector<index_t> level(sizes[t]);
            for (auto& p : level) p = io::read_le<std::uint32_t>(is, path.string());
            tree.parents.push_back(std::move(level));
        }
        tree.validate();
        return tree;
    }
};

struct TreeConfig {
    std::size_t branching = 16;
    std::size_t max_leaf_size = 100;
};

/// Smallest depth at which balanced splitting brings every cluster down to
/// max_leaf_size: ceil(L / branching^depth) <= max_leaf_size.
inline std::size_t tree_depth_for(std::size_t num_labels, const TreeConfig& cfg) {
    std::size_t depth = 0;
    std::size_t largest = num_labels;
    while (largest > cfg.max_leaf_size) {
        largest = (largest + cfg.branching - 1) / cfg.branching;
        ++depth;
    }
    return depth;
}

/// Every split divides a cluster of m labels into min(branching, m) balanced
/// parts, and all leaves end at the same depth.
inline LabelTree build_label_tree(const SparseMatrix& embeddings, const TreeConfig& cfg, std::uint64_t seed) {
    if (cfg.branching < 2) throw Error(ErrorKind::invalid_argument, "branching must be >= 2");
    if (cfg.max_leaf_size < 1) throw Error(ErrorKind::invalid_argument, "max_leaf_size must be >= 1");
    const std::size_t num_labels = embeddings.rows();
    const std::size_t depth = tree_depth_for(num_labels, cfg);

    LabelTree tree;
    tree.branching = cfg.branching;
    std::vector<std::vector<index_t>> clusters(1);
    clusters[0].resize(num_labels);
    std::iota(clusters[0].begin(), clusters[0].end(), index_t{0});

    for (std::size_t t = 0; t < depth; ++t) {
        std::vector<std::vector<std::vector<index_t>>> parts(clusters.size());
        parallel_for(clusters.size(), [&](std::size_t c) {
            const auto& members = clusters[c];
            const std::size_t k = std::min(cfg.branching, members.size());
            if (k <= 1) {
                parts[c] = {members};
                return;
            }
            const auto assign = spherical_kmeans(select_rows(embeddings, members), k, mix_seed(seed, t, c));
            parts[c].assign(k, {});
            for (std::size_t a = 0; a < members.size(); ++a) parts[c][assign[a]].push_back(members[a]);
        });
        std::vector<std::vector<index_t>> next;
        std::vector<index_t> level_parents;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (auto& part : parts[c]) {
                next.push_back(std::move(part));
                level_parents.push_back(static_cast<index_t>(c));
            }
        }
        tree.parents.push_back(std::move(level_parents));
        clusters = std::move(next);
    }
    std::vector<index_t> label_parent(num_labels, 0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (index_t l : clusters[c]) label_parent[l] = static_cast<index_t>(c);
    }
    tree.parents.push_back(std::move(label_parent));
    return tree;
}

}  // namespace pina_xmc
