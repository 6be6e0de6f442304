#pragma once

// End-to-end pipeline: config file, feature construction (plain or with
// neighborhood augmentation), downstream training, prediction, and the
// baseline / augmented / naive comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "pina_xmc/cluster.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/eval.hpp"
#include "pina_xmc/ingest.hpp"
#include "pina_xmc/linear_xmc.hpp"
#include "pina_xmc/log.hpp"
#include "pina_xmc/pina.hpp"
#include "pina_xmc/sparse.hpp"
#include "pina_xmc/textvec.hpp"

namespace pina_xmc {

struct PredictConfig {
    std::size_t beam = 10;
    std::size_t topk = 5;
    bool operator==(const PredictConfig&) const = default;
};

struct PinaConfig {
    bool enabled = false;
    std::size_t k = 5;
    PretrainMode mode = PretrainMode::label_text;
    FeatureComposition features = FeatureComposition::concatenated;
    double i2i_threshold = 0.0;
    bool operator==(const PinaConfig&) const = default;
};

struct PathsConfig {
    std::string train;
    std::string test;
    /// Weighted instance-to-instance graph over the training set (XMCM).
    std::string i2i_graph;
    bool operator==(const PathsConfig&) const = default;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    VectorizerConfig vectorizer;
    TreeConfig tree;
    TrainConfig train;
    PredictConfig predict;
    PinaConfig pina;
    PathsConfig paths;

    void validate() const {
        if (vectorizer.min_df < 1) throw Error(ErrorKind::invalid_argument, "vectorizer.min_df must be >= 1");
        if (tree.branching < 2) throw Error(ErrorKind::invalid_argument, "tree.branching must be >= 2");
        if (tree.max_leaf_size < 1) throw Error(ErrorKind::invalid_argument, "tree.max_leaf_size must be >= 1");
        train.validate();
        if (predict.beam < 1) throw Error(ErrorKind::invalid_argument, "predict.beam must be >= 1");
        if (predict.topk < 1) throw Error(ErrorKind::invalid_argument, "predict.topk must be >= 1");
        if (pina.k < 1) throw Error(ErrorKind::invalid_argument, "pina.k must be >= 1");
    }

    TrainConfig seeded_train() const {
        TrainConfig t = train;
        t.seed = seed;
        return t;
    }

    nlohmann::json to_json() const {
        return {{"seed", seed},
                {"vectorizer", {{"mode", to_string(vectorizer.mode)}, {"min_df", vectorizer.min_df}}},
                {"tree", {{"branching", tree.branching}, {"max_leaf_size", tree.max_leaf_size}}},
                {"train",
                 {{"loss", to_string(train.loss)},
                  {"lambda", train.lambda},
                  {"prune_threshold", train.prune_threshold},
                  {"tolerance", train.tolerance},
                  {"max_iterations", train.max_iterations}}},
                {"predict", {{"beam", predict.beam}, {"topk", predict.topk}}},
                {"pina",
                 {{"enabled", pina.enabled},
                  {"k", pina.k},
                  {"mode", to_string(pina.mode)},
                  {"features", to_string(pina.features)},
                  {"i2i_threshold", pina.i2i_threshold}}},
                {"paths", {{"train", paths.train}, {"test", paths.test}, {"i2i_graph", paths.i2i_graph}}}};
    }
};

namespace detail {

// Strict reader: every key must be known and of the right type.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [key, value] : j_.items()) {
            if (!known.count(key)) fail("unknown key '" + key + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    ConfigReader section(const char* key) const { return ConfigReader(j_.at(key), where_ + "." + key); }

    template <class T>
    void get(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(std::string(key) + " must be a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
                fail(std::string(key) + " must be a non-negative integer");
            }
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(std::string(key) + " must be a number");
            out = v.get<T>();
        } else {
            if (!v.is_string()) fail(std::string(key) + " must be a string");
            out = v.get<std::string>();
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::invalid_argument, "config " + where_ + ": " + what);
    }

private:
    const nlohmann::json& j_;
    std::string where_;
};

inline std::string resolve(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Parses and validates a config document. Relative paths resolve against
/// base_dir.
inline PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    PipelineConfig cfg;
    detail::ConfigReader root(j, "root");
    root.allow({"seed", "vectorizer", "tree", "train", "predict", "pina", "paths"});
    root.get("seed", cfg.seed);
    auto wrap = [](auto&& fn, const detail::ConfigReader& r) {
        try {
            fn();
        } catch (const Error& e) {
            r.fail(e.what());
        }
    };
    if (root.has("vectorizer")) {
        auto s = root.section("vectorizer");
        s.allow({"mode", "min_df"});
        std::string mode = to_string(cfg.vectorizer.mode);
        s.get("mode", mode);
        wrap([&] { cfg.vectorizer.mode = parse_vectorizer_mode(mode); }, s);
        s.get("min_df", cfg.vectorizer.min_df);
    }
    if (root.has("tree")) {
        auto s = root.section("tree");
        s.allow({"branching", "max_leaf_size"});
        s.get("branching", cfg.tree.branching);
        s.get("max_leaf_size", cfg.tree.max_leaf_size);
    }
    if (root.has("train")) {
        auto s = root.section("train");
        s.allow({"loss", "lambda", "prune_threshold", "tolerance", "max_iterations"});
        std::string loss = to_string(cfg.train.loss);
        s.get("loss", loss);
        wrap([&] { cfg.train.loss = parse_loss(loss); }, s);
        s.get("lambda", cfg.train.lambda);
        s.get("prune_threshold", cfg.train.prune_threshold);
        s.get("tolerance", cfg.train.tolerance);
        s.get("max_iterations", cfg.train.max_iterations);
    }
    if (root.has("predict")) {
        auto s = root.section("predict");
        s.allow({"beam", "topk"});
        s.get("beam", cfg.predict.beam);
        s.get("topk", cfg.predict.topk);
    }
    if (root.has("pina")) {
        auto s = root.section("pina");
        s.allow({"enabled", "k", "mode", "features", "i2i_threshold"});
        s.get("enabled", cfg.pina.enabled);
        s.get("k", cfg.pina.k);
        std::string mode = to_string(cfg.pina.mode);
        std::string features = to_string(cfg.pina.features);
        s.get("mode", mode);
        s.get("features", features);
        wrap([&] { cfg.pina.mode = parse_pretrain_mode(mode); }, s);
        wrap([&] { cfg.pina.features = parse_feature_composition(features); }, s);
        s.get("i2i_threshold", cfg.pina.i2i_threshold);
    }
    if (root.has("paths")) {
        auto s = root.section("paths");
        s.allow({"train", "test", "i2i_graph"});
        s.get("train", cfg.paths.train);
        s.get("test", cfg.paths.test);
        s.get("i2i_graph", cfg.paths.i2i_graph);
        cfg.paths.train = detail::resolve(cfg.paths.train, base_dir);
        cfg.paths.test = detail::resolve(cfg.paths.test, base_dir);
        cfg.paths.i2i_graph = detail::resolve(cfg.paths.i2i_graph, base_dir);
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        root.fail(e.what());
    }
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "no such config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------

/// Everything needed to featurize and label new instances.
struct Pipeline {
    /// Statistical features for the downstream model; absent when the
    /// training set shipped precomputed features.
    std::optional<Vectorizer> vectorizer;
    std::size_t base_dim = 0;
    std::optional<NeighborPredictor> predictor;
    std::size_t k = 5;
    FeatureComposition composition = FeatureComposition::concatenated;
    XmcModel model;
};

inline PredictorConfig predictor_config(const PipelineConfig& cfg) {
    return PredictorConfig{cfg.vectorizer, cfg.tree, cfg.seeded_train(), cfg.predict.beam};
}

inline PretrainingTask pretraining_task_for(const Dataset& train, const PipelineConfig& cfg) {
    if (train.instances.empty()) {
        throw Error(ErrorKind::invalid_argument, "neighbor pretraining needs instance text for the training set");
    }
    switch (cfg.pina.mode) {
        case PretrainMode::label_text:
        case PretrainMode::naive:
            if (train.labels.empty()) {
                throw Error(ErrorKind::invalid_argument, "mode " + to_string(cfg.pina.mode) + " needs label text");
            }
            return cfg.pina.mode == PretrainMode::label_text
                       ? build_pretraining_task(train.instances, train.labels, train.y)
                       : build_naive_pretraining_task(train.instances, train.labels, train.y);
        case PretrainMode::i2i: {
            if (cfg.paths.i2i_graph.empty()) {
                throw Error(ErrorKind::invalid_argument, "mode i2i needs paths.i2i_graph");
            }
            const SparseMatrix graph = load_matrix(cfg.paths.i2i_graph);
            return build_i2i_pretraining_task(threshold_correlation(graph, cfg.pina.i2i_threshold), train.instances);
        }
    }
    throw Error(ErrorKind::invalid_argument, "unknown pretraining mode");
}

inline NeighborPredictor pretrain(const Dataset& train, const PipelineConfig& cfg) {
    const PretrainingTask task = pretraining_task_for(train, cfg);
    log::info("pretrain_start", {{"mode", to_string(task.mode)},
                                 {"inputs", task.corpus_pre.size()},
                                 {"nodes", task.node_texts.size()},
                                 {"nnz", task.b_pre.nnz()}});
    NeighborPredictor g = train_neighbor_predictor(task, predictor_config(cfg));
    log::info("pretrain_done", {{"vocab", g.vectorizer().dim()}, {"depth", g.model().tree().depth()}});
    return g;
}

inline SparseMatrix base_features(const Pipeline& p, const Dataset& ds) {
    if (!p.vectorizer) {
        if (!ds.features) throw Error(ErrorKind::invalid_argument, "model expects precomputed features");
        if (ds.features->cols() != p.base_dim) {
            throw Error(ErrorKind::shape_mismatch, "features have " + std::to_string(ds.features->cols()) +
                                                       " columns, model expects " + std::to_string(p.base_dim));
        }
        return *ds.features;
    }
    if (ds.instances.size() != ds.num_instances()) {
        throw Error(ErrorKind::invalid_argument, "model expects instance text");
    }
    return p.vectorizer->transform_corpus(ds.instances);
}

inline SparseMatrix pipeline_features(const Pipeline& p, const Dataset& ds) {
    SparseMatrix stat = base_features(p, ds);
    if (!p.predictor) return stat;
    if (ds.instances.size() != ds.num_instances()) {
        throw Error(ErrorKind::invalid_argument, "neighborhood augmentation needs instance text");
    }
    return downstream_features(augment(*p.predictor, ds.instances, p.k), stat, p.composition);
}

/// Trains the downstream model; with cfg.pina.enabled the features are
/// augmented by `predictor` (pretrained here when not supplied).
inline Pipeline train_pipeline(const Dataset& data, const PipelineConfig& cfg,
                               std::optional<NeighborPredictor> predictor = std::nullopt) {
    data.validate();
    Pipeline p;
    p.k = cfg.pina.k;
    p.composition = cfg.pina.features;
    if (data.features) {
        p.base_dim = data.features->cols();
    } else {
        if (data.instances.empty()) throw Error(ErrorKind::invalid_argument, "training set has neither features nor text");
        p.vectorizer = Vectorizer::fit(data.instances, cfg.vectorizer);
        p.base_dim = p.vectorizer->dim();
    }
    if (cfg.pina.enabled) p.predictor = predictor ? std::move(predictor) : pretrain(data, cfg);
    const SparseMatrix x = pipeline_features(p, data);
    log::info("train_start", {{"instances", x.rows()}, {"features", x.cols()}, {"labels", data.y.cols()},
                              {"pina", cfg.pina.enabled}});
    const SparseMatrix z = pifa_label_embeddings(data.y, x);
    const LabelTree tree = build_label_tree(z, cfg.tree, cfg.seed);
    p.model = train(x, data.y, tree, cfg.seeded_train());
    log::info("train_done", {{"depth", tree.depth()}, {"layers", p.model.num_layers()}});
    return p;
}

inline std::vector<ScoredLabels> predict_pipeline(const Pipeline& p, const Dataset& ds, std::size_t beam,
                                                  std::size_t topk) {
    return predict_batch(p.model, pipeline_features(p, ds), beam, topk);
}

inline std::vector<LabelList> ranked_labels(const std::vector<ScoredLabels>& preds) {
    std::vector<LabelList> out(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (const auto& s : preds[i]) out[i].push_back(s.label);
    }
    return out;
}

inline std::vector<LabelList> truth_lists(const SparseMatrix& y) {
    std::vector<LabelList> out(y.rows());
    for (std::size_t i = 0; i < y.rows(); ++i) {
        const RowView r = y.row(i);
        out[i].assign(r.indices.begin(), r.indices.end());
    }
    return out;
}

// Pipeline directory: pipeline.json, model/, vectorizer.{json,tsv} (text
// features only) and pina/ (augmented pipelines only).

inline void save_pipeline(const Pipeline& p, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_model(p.model, dir / "model");
    if (p.vectorizer) p.vectorizer->save(dir);
    nlohmann::json recipe = {{"format", "pina-xmc-pipeline"},
                             {"format_version", 1},
                             {"features", p.vectorizer ? "text" : "precomputed"},
                             {"base_dim", p.base_dim}};
    if (p.predictor) {
        save_neighbor_predictor(*p.predictor, dir / "pina");
        recipe["pina"] = {{"k", p.k}, {"features", to_string(p.composition)}, {"mode", to_string(p.predictor->mode())}};
    } else {
        recipe["pina"] = nullptr;
    }
    io::write_file(dir / "pipeline.json", recipe.dump(2) + "\n");
}

inline Pipeline load_pipeline(const std::filesystem::path& dir) {
    const auto path = dir / "pipeline.json";
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing pipeline manifest: " + path.string());
    Pipeline p;
    try {
        const auto j = nlohmann::json::parse(io::read_file(path));
        if (j.value("format", "") != "pina-xmc-pipeline" || j.value("format_version", -1) != 1) {
            throw Error(ErrorKind::format, path.string() + " is not a supported pipeline manifest");
        }
        p.base_dim = j.at("base_dim").get<std::size_t>();
        if (j.at("features").get<std::string>() == "text") p.vectorizer = Vectorizer::load(dir);
        if (!j.at("pina").is_null()) {
            p.k = j.at("pina").at("k").get<std::size_t>();
            p.composition = parse_feature_composition(j.at("pina").at("features").get<std::string>());
            p.predictor = load_neighbor_predictor(dir / "pina");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
    p.model = load_model(dir / "model");
    return p;
}

// ---------------------------------------------------------------------------

enum class System { baseline, pina, pina_naive };

inline std::string to_string(System s) {
    switch (s) {
        case System::baseline: return "baseline";
        case System::pina: return "pina";
        case System::pina_naive: return "pina-naive";
    }
    return "unknown";
}

struct AblationResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> ks;
    /// reports[system][seed index]
    std::map<System, std::vector<EvalReport>> reports;

    double mean_precision(System s, std::size_t k) const {
        double sum = 0.0;
        for (const auto& r : reports.at(s)) sum += r.precision.at(k);
        return sum / static_cast<double>(reports.at(s).size());
    }

    /// Per-instance P@k averaged over seeds.
    std::vector<double> seed_averaged(System s, std::size_t k) const {
        const auto& rs = reports.at(s);
        std::vector<double> out(rs.front().num_instances, 0.0);
        for (const auto& r : rs) {
            const auto& v = r.precision_per_instance.at(k);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
        }
        for (auto& v : out) v /= static_cast<double>(rs.size());
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seeds"] = seeds;
        for (const auto& [system, rs] : reports) {
            auto& js = j["systems"][to_string(system)];
            for (auto k : ks) {
                js["mean_precision"][std::to_string(k)] = mean_precision(system, k);
                std::vector<double> per_seed;
                for (const auto& r : rs) per_seed.push_back(r.precision.at(k));
                js["precision_per_seed"][std::to_string(k)] = per_seed;
            }
        }
        for (auto k : ks) {
            const auto base = seed_averaged(System::baseline, k);
            for (System s : {System::pina, System::pina_naive}) {
                const auto tt = paired_t_test(seed_averaged(s, k), base);
                j["significance_vs_baseline"][to_string(s)][std::to_string(k)] = {
                    {"t", std::isfinite(tt.t) ? nlohmann::json(tt.t) : nlohmann::json(tt.t > 0 ? "inf" : "-inf")},
                    {"p_value", tt.p_value},
                    {"degenerate", tt.degenerate}};
            }
        }
        return j;
    }
};

/// Baseline, label-text augmentation and the B-only ablation, each trained
/// once per seed on `train` and scored on `test`.
inline AblationResult run_ablation(const Dataset& train, const Dataset& test, const PipelineConfig& cfg,
                                   const std::vector<std::uint64_t>& seeds, std::vector<std::size_t> ks = {1, 3, 5}) {
    AblationResult result;
    result.seeds = seeds;
    result.ks = ks;
    const std::size_t topk = std::max(cfg.predict.topk, *std::max_element(ks.begin(), ks.end()));
    const auto truth = truth_lists(test.y);
    for (auto seed : seeds) {
        for (System system : {System::baseline, System::pina, System::pina_naive}) {
            PipelineConfig run = cfg;
            run.seed = seed;
            run.pina.enabled = system != System::baseline;
            run.pina.mode = system == System::pina_naive ? PretrainMode::naive : PretrainMode::label_text;
            const Pipeline p = train_pipeline(train, run);
            const auto preds = predict_pipeline(p, test, run.predict.beam, topk);
            result.reports[system].push_back(evaluate(truth, ranked_labels(preds), ks));
            log::info("ablation_run", {{"system", to_string(system)},
                                       {"seed", seed},
                                       {"p_at_1", result.reports[system].back().precision.at(ks.front())}});
        }
    }
    return result;
}

}  // namespace pina_xmc
