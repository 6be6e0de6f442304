#pragma once

// Ranking metrics, evaluation-time pair filtering, and the paired t-test
// used to compare two systems instance by instance.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/sparse.hpp"

namespace pina_xmc {

using LabelList = std::vector<index_t>;

namespace detail {
inline void require_unique(std::span<const index_t> ranked) {
    std::vector<index_t> sorted(ranked.begin(), ranked.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(ErrorKind::invalid_argument, "ranked list contains duplicate labels");
    }
}
}  // namespace detail

/// Relevant labels among the first k ranked ones. Short rankings simply
/// contribute fewer hits.
inline std::size_t hits_at_k(std::span<const index_t> truth, std::span<const index_t> ranked, std::size_t k) {
    if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
    detail::require_unique(ranked);
    std::vector<index_t> relevant(truth.begin(), truth.end());
    std::sort(relevant.begin(), relevant.end());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) ++hits;
    }
    return hits;
}

inline double precision_at_k(std::span<const index_t> truth, std::span<const index_t> ranked, std::size_t k) {
    return static_cast<double>(hits_at_k(truth, ranked, k)) / static_cast<double>(k);
}

/// Empty truth yields 0.
inline double recall_at_k(std::span<const index_t> truth, std::span<const index_t> ranked, std::size_t k) {
    const std::size_t hits = hits_at_k(truth, ranked, k);
    if (truth.empty()) return 0.0;
    std::vector<index_t> relevant(truth.begin(), truth.end());
    std::sort(relevant.begin(), relevant.end());
    relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Removes the listed (instance, label) pairs from both ground truth and
/// predictions; surviving predictions keep their order.
inline std::pair<std::vector<LabelList>, std::vector<LabelList>> reciprocal_pair_filter(
    std::span<const std::pair<index_t, index_t>> pairs, const std::vector<LabelList>& truth,
    const std::vector<LabelList>& predictions, std::size_t num_labels) {
    if (truth.size() != predictions.size()) {
        throw Error(ErrorKind::shape_mismatch, std::to_string(truth.size()) + " truth rows vs " +
                                                   std::to_string(predictions.size()) + " prediction rows");
    }
    std::vector<std::vector<index_t>> drop(truth.size());
    for (const auto& [inst, label] : pairs) {
        if (inst >= truth.size() || label >= num_labels) {
            throw Error(ErrorKind::out_of_range, "filter pair (" + std::to_string(inst) + ", " +
                                                     std::to_string(label) + ") outside " +
                                                     shape_str(truth.size(), num_labels));
        }
        drop[inst].push_back(label);
    }
    for (auto& d : drop) std::sort(d.begin(), d.end());
    auto strip = [&](const std::vector<LabelList>& rows) {
        std::vector<LabelList> out(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (index_t l : rows[i]) {
                if (!std::binary_search(drop[i].begin(), drop[i].end(), l)) out[i].push_back(l);
            }
        }
        return out;
    };
    return {strip(truth), strip(predictions)};
}

/// Parses "instance_id<TAB>label_id" lines.
inline std::vector<std::pair<index_t, index_t>> read_filter_pairs(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::vector<std::pair<index_t, index_t>> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        index_t a = 0;
        index_t b = 0;
        bool ok = tab != std::string::npos;
        if (ok) {
            auto r1 = std::from_chars(line.data(), line.data() + tab, a);
            auto r2 = std::from_chars(line.data() + tab + 1, line.data() + line.size(), b);
            ok = r1.ec == std::errc() && r1.ptr == line.data() + tab && r2.ec == std::errc() &&
                 r2.ptr == line.data() + line.size();
        }
        if (!ok) {
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) +
                                               ": expected instance_id<TAB>label_id");
        }
        pairs.emplace_back(a, b);
    }
    return pairs;
}

struct TTestResult {
    double t = 0.0;
    double p_value = 1.0;
    std::size_t df = 0;
    /// Differences had zero variance but nonzero mean.
    bool degenerate = false;
};

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b); converges to ~1e-14 relative.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees.
inline double student_t_two_sided(double t, double df) {
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::shape_mismatch, "paired t-test on " + std::to_string(a.size()) + " vs " +
                                                   std::to_string(b.size()) + " samples");
    }
    if (a.size() < 2) throw Error(ErrorKind::invalid_argument, "paired t-test needs at least 2 samples");
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dev = (a[i] - b[i]) - mean;
        ss += dev * dev;
    }
    TTestResult r;
    r.df = n - 1;
    if (ss == 0.0) {
        if (mean == 0.0) return r;
        r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.degenerate = true;
        return r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_sided(r.t, static_cast<double>(r.df));
    return r;
}

struct EvalReport {
    std::vector<std::size_t> ks;
    std::map<std::size_t, double> precision;
    std::map<std::size_t, double> recall;
    std::map<std::size_t, std::vector<double>> precision_per_instance;
    std::map<std::size_t, std::vector<double>> recall_per_instance;
    std::size_t num_instances = 0;
    /// Present when compared against a baseline: paired t-test on P@k.
    std::map<std::size_t, TTestResult> p_values;

    nlohmann::json to_json(bool include_per_instance = false) const {
        nlohmann::json j;
        j["num_instances"] = num_instances;
        for (auto k : ks) {
            const auto key = std::to_string(k);
            j["precision"][key] = precision.at(k);
            j["recall"][key] = recall.at(k);
            if (include_per_instance) {
                j["per_instance"]["precision"][key] = precision_per_instance.at(k);
                j["per_instance"]["recall"][key] = recall_per_instance.at(k);
            }
        }
        for (const auto& [k, tt] : p_values) {
            j["significance"][std::to_string(k)] = {
                {"t", std::isfinite(tt.t) ? nlohmann::json(tt.t) : nlohmann::json(tt.t > 0 ? "inf" : "-inf")},
                {"p_value", tt.p_value},
                {"df", tt.df},
                {"degenerate", tt.degenerate}};
        }
        return j;
    }
};

inline EvalReport evaluate(const std::vector<LabelList>& truth, const std::vector<LabelList>& ranked,
                           std::span<const std::size_t> ks) {
    if (truth.size() != ranked.size()) {
        throw Error(ErrorKind::shape_mismatch, std::to_string(truth.size()) + " truth rows vs " +
                                                   std::to_string(ranked.size()) + " prediction rows");
    }
    EvalReport report;
    report.ks.assign(ks.begin(), ks.end());
    report.num_instances = truth.size();
    for (auto k : ks) {
        auto& pk = report.precision_per_instance[k];
        auto& rk = report.recall_per_instance[k];
        pk.resize(truth.size());
        rk.resize(truth.size());
        double psum = 0.0;
        double rsum = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            pk[i] = precision_at_k(truth[i], ranked[i], k);
            rk[i] = recall_at_k(truth[i], ranked[i], k);
            psum += pk[i];
            rsum += rk[i];
        }
        const double n = truth.empty() ? 1.0 : static_cast<double>(truth.size());
        report.precision[k] = psum / n;
        report.recall[k] = rsum / n;
    }
    return report;
}

/// Adds paired t-tests of per-instance P@k against a baseline report.
inline void compare_with_baseline(EvalReport& report, const EvalReport& baseline) {
    for (auto k : report.ks) {
        auto it = baseline.precision_per_instance.find(k);
        if (it == baseline.precision_per_instance.end()) continue;
        report.p_values[k] = paired_t_test(report.precision_per_instance.at(k), it->second);
    }
}

}  // namespace pina_xmc
