// pina_xmc command-line driver.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pina_xmc.hpp"

namespace fs = std::filesystem;
using namespace pina_xmc;

namespace {

struct Globals {
    std::string config;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
};

PipelineConfig config_from(const Globals& g, bool required) {
    PipelineConfig cfg;
    if (!g.config.empty()) {
        cfg = load_config(g.config);
    } else if (required) {
        throw CLI::RequiredError("--config");
    }
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

Dataset dataset_from(const std::string& path, const char* what) {
    if (path.empty()) throw Error(ErrorKind::invalid_argument, std::string("no ") + what + " dataset given");
    if (fs::is_directory(path)) return load_dataset(path);
    return parse_xmc_dataset(path);
}

// Truth may be a dataset directory, a features.txt-style file, or an XMCM
// matrix.
SparseMatrix truth_from(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::io, "no such file: " + path);
    if (fs::is_directory(path)) return load_dataset(path).y;
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::equal(magic, magic + 4, kMatrixMagic)) return load_matrix(path);
    return parse_xmc_dataset(path).y;
}

void write_json(const nlohmann::json& j, const std::string& out) {
    const std::string text = j.dump(2) + "\n";
    if (!out.empty()) io::write_file(out, text);
    std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extreme multi-label classification with predicted instance neighborhoods"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "pipeline config (JSON)");
    app.add_option("--threads", g.threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s; },
                                           "override the config seed");

    std::string model_dir;
    std::string out;
    std::string input;
    std::string predictor_dir;

    auto* train_cmd = app.add_subcommand("train", "train the downstream model (augmented when pina.enabled)");
    train_cmd->add_option("--model-dir", model_dir, "output model directory")->required();
    train_cmd->add_option("--input", input, "training dataset (defaults to paths.train)");
    train_cmd->add_option("--predictor", predictor_dir, "pretrained neighbor predictor to reuse");

    std::optional<std::size_t> beam;
    std::optional<std::size_t> topk;
    auto* predict_cmd = app.add_subcommand("predict", "rank labels for a dataset");
    predict_cmd->add_option("--model-dir", model_dir, "trained model directory")->required();
    predict_cmd->add_option("--input", input, "dataset to label (defaults to paths.test)");
    predict_cmd->add_option("--out", out, "score matrix output (XMCM)")->required();
    predict_cmd->add_option_function<std::size_t>("--beam", [&](const std::size_t& v) { beam = v; }, "beam width");
    predict_cmd->add_option_function<std::size_t>("--topk", [&](const std::size_t& v) { topk = v; }, "labels kept");

    std::string pred_path;
    std::string truth_path;
    std::string filter_path;
    std::string baseline_path;
    std::vector<std::size_t> ks{1, 3, 5};
    bool per_instance = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "P@k / R@k of a score matrix, JSON on stdout");
    eval_cmd->add_option("--pred", pred_path, "predicted score matrix (XMCM)")->required();
    eval_cmd->add_option("--truth", truth_path, "ground truth (dataset file/dir or XMCM)")->required();
    eval_cmd->add_option("--k", ks, "cutoffs, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
    eval_cmd->add_option("--filter", filter_path, "instance<TAB>label pairs to drop before scoring");
    eval_cmd->add_option("--baseline", baseline_path, "baseline score matrix for paired t-tests");
    eval_cmd->add_option("--out", out, "also write the report here");
    eval_cmd->add_flag("--per-instance", per_instance, "include per-instance metrics");

    auto* pretrain_cmd = app.add_subcommand("pina-pretrain", "train the neighbor predictor");
    pretrain_cmd->add_option("--out", out, "predictor directory")->required();
    pretrain_cmd->add_option("--input", input, "training dataset (defaults to paths.train)");

    std::optional<std::size_t> k_override;
    auto* augment_cmd = app.add_subcommand("pina-augment", "write neighborhood-augmented features");
    augment_cmd->add_option("--predictor", predictor_dir, "neighbor predictor directory")->required();
    augment_cmd->add_option("--input", input, "dataset with instance text")->required();
    augment_cmd->add_option("--out", out, "augmented matrix (XMCM); a .json manifest is written beside it")
        ->required();
    augment_cmd->add_option_function<std::size_t>("--neighbors", [&](const std::size_t& v) { k_override = v; },
                                                  "K (defaults to pina.k)");

    std::vector<std::uint64_t> seeds;
    auto* ablate_cmd = app.add_subcommand("ablate-naive", "baseline vs label-text vs B-only pretraining");
    ablate_cmd->add_option("--seeds", seeds, "seeds, comma separated (default: 5 from the config seed)")
        ->delimiter(',');
    ablate_cmd->add_option("--out", out, "also write the report here");

    std::uint64_t gen_seed = SyntheticConfig{}.seed;
    auto* synth_cmd = app.add_subcommand("generate-synthetic", "write the synthetic train/test datasets");
    synth_cmd->add_option("--out", out, "output directory")->required();
    synth_cmd->add_option("--generator-seed", gen_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        set_num_threads(g.threads);
        if (train_cmd->parsed()) {
            const PipelineConfig cfg = config_from(g, true);
            const Dataset data = dataset_from(input.empty() ? cfg.paths.train : input, "training");
            std::optional<NeighborPredictor> predictor;
            PipelineConfig run = cfg;
            if (!predictor_dir.empty()) {
                predictor = load_neighbor_predictor(predictor_dir);
                run.pina.enabled = true;
            }
            const Pipeline p = train_pipeline(data, run, std::move(predictor));
            save_pipeline(p, model_dir);
            log::info("saved", {{"model_dir", model_dir}});
        } else if (predict_cmd->parsed()) {
            const PipelineConfig cfg = config_from(g, false);
            const Pipeline p = load_pipeline(model_dir);
            const Dataset data = dataset_from(input.empty() ? cfg.paths.test : input, "input");
            const std::size_t b = beam.value_or(cfg.predict.beam);
            const std::size_t k = topk.value_or(cfg.predict.topk);
            if (b < 1 || k < 1) throw Error(ErrorKind::invalid_argument, "--beam and --topk must be >= 1");
            const auto preds = predict_pipeline(p, data, b, k);
            save_matrix(out, to_score_matrix(preds, p.model.num_labels()));
            log::info("predicted", {{"instances", preds.size()}, {"out", out}});
        } else if (eval_cmd->parsed()) {
            const SparseMatrix truth = truth_from(truth_path);
            if (!fs::exists(pred_path)) throw Error(ErrorKind::io, "no such file: " + pred_path);
            const SparseMatrix pred = load_matrix(pred_path);
            if (pred.rows() != truth.rows()) {
                throw Error(ErrorKind::shape_mismatch, pred_path + " has " + std::to_string(pred.rows()) +
                                                           " rows, truth has " + std::to_string(truth.rows()));
            }
            auto truth_l = truth_lists(truth);
            auto pred_l = ranked_labels(from_score_matrix(pred));
            std::optional<std::vector<LabelList>> base_l;
            if (!baseline_path.empty()) {
                if (!fs::exists(baseline_path)) throw Error(ErrorKind::io, "no such file: " + baseline_path);
                base_l = ranked_labels(from_score_matrix(load_matrix(baseline_path)));
            }
            if (!filter_path.empty()) {
                const auto pairs = read_filter_pairs(filter_path);
                const std::size_t labels = std::max(truth.cols(), pred.cols());
                auto [t2, p2] = reciprocal_pair_filter(pairs, truth_l, pred_l, labels);
                if (base_l) base_l = reciprocal_pair_filter(pairs, truth_l, *base_l, labels).second;
                truth_l = std::move(t2);
                pred_l = std::move(p2);
            }
            EvalReport report = evaluate(truth_l, pred_l, ks);
            if (base_l) compare_with_baseline(report, evaluate(truth_l, *base_l, ks));
            write_json(report.to_json(per_instance), out);
        } else if (pretrain_cmd->parsed()) {
            const PipelineConfig cfg = config_from(g, true);
            const Dataset data = dataset_from(input.empty() ? cfg.paths.train : input, "training");
            save_neighbor_predictor(pretrain(data, cfg), out);
            log::info("saved", {{"predictor", out}, {"hash", directory_fingerprint(out)}});
        } else if (augment_cmd->parsed()) {
            const PipelineConfig cfg = config_from(g, false);
            const NeighborPredictor predictor = load_neighbor_predictor(predictor_dir);
            const Dataset data = dataset_from(input, "input");
            if (data.instances.size() != data.num_instances()) {
                throw Error(ErrorKind::invalid_argument, input + ": augmentation needs instance text");
            }
            const std::size_t k = k_override.value_or(cfg.pina.k);
            const SparseMatrix aug = augment(predictor, data.instances, k);
            save_matrix(out, aug);
            const nlohmann::json manifest = {{"k", k},
                                             {"predictor", fs::absolute(predictor_dir).lexically_normal().string()},
                                             {"predictor_hash", directory_fingerprint(predictor_dir)},
                                             {"input", input},
                                             {"rows", aug.rows()},
                                             {"cols", aug.cols()}};
            io::write_file(out + ".json", manifest.dump(2) + "\n");
            log::info("augmented", {{"rows", aug.rows()}, {"cols", aug.cols()}, {"k", k}});
        } else if (ablate_cmd->parsed()) {
            const PipelineConfig cfg = config_from(g, true);
            if (seeds.empty()) {
                for (std::uint64_t s = 0; s < 5; ++s) seeds.push_back(cfg.seed + s);
            }
            const Dataset train = dataset_from(cfg.paths.train, "training");
            const Dataset test = dataset_from(cfg.paths.test, "test");
            write_json(run_ablation(train, test, cfg, seeds).to_json(), out);
        } else if (synth_cmd->parsed()) {
            SyntheticConfig sc;
            sc.seed = gen_seed;
            const SyntheticData data = generate_synthetic(sc);
            write_dataset(data.train, fs::path(out) / "train");
            write_dataset(data.test, fs::path(out) / "test");
            log::info("generated", {{"out", out}});
        }
    } catch (const CLI::RequiredError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const Error& e) {
        log::error("failed", {{"message", e.what()}});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        log::error("failed", {{"message", e.what()}});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
