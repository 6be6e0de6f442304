#pragma once

// Dataset files.
//
//   features.txt       header "N D L", then N lines "l,l,... f:v f:v ..."
//                      (D = 0 when there are no precomputed features)
//   instance_text.txt  one document per line, line i = instance i
//   label_text.txt     one label text per line, line l = label l
//
// All ids are zero-based. An empty label field (line starting with a space,
// or a line that is empty or starts with a feature) is an instance without
// labels.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/sparse.hpp"
#include "pina_xmc/textvec.hpp"

namespace pina_xmc {

struct Dataset {
    /// Raw instance text; empty when only precomputed features are known.
    Corpus instances;
    /// Label text; empty when the dataset carries none.
    Corpus labels;
    SparseMatrix y;
    /// Precomputed features (N x D); preferred over text when both exist.
    std::optional<SparseMatrix> features;
    std::string split;

    std::size_t num_instances() const { return y.rows(); }
    std::size_t num_labels() const { return y.cols(); }

    void validate() const {
        if (!instances.empty() && instances.size() != y.rows()) {
            throw Error(ErrorKind::shape_mismatch, std::to_string(instances.size()) + " instance texts for " +
                                                       std::to_string(y.rows()) + " label rows");
        }
        if (!labels.empty() && labels.size() != y.cols()) {
            throw Error(ErrorKind::shape_mismatch,
                        std::to_string(labels.size()) + " label texts for " + std::to_string(y.cols()) + " labels");
        }
        if (features && features->rows() != y.rows()) {
            throw Error(ErrorKind::shape_mismatch, "feature matrix is " + shape_str(features->rows(), features->cols()) +
                                                       " but there are " + std::to_string(y.rows()) + " instances");
        }
    }

    bool operator==(const Dataset&) const = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            ++i;
            continue;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (b & 0x3F);
        }
        // overlong forms, surrogates, beyond U+10FFFF
        static constexpr char32_t min_cp[] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < min_cp[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path) : path_(path) {
        if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "no such file: " + path.string());
        data_ = io::read_file(path);
        if (!valid_utf8(data_)) throw Error(ErrorKind::format, path.string() + ": not valid UTF-8");
    }

    bool next(std::string_view& line) {
        if (pos_ >= data_.size()) return false;
        const auto end = data_.find('\n', pos_);
        const std::size_t stop = end == std::string::npos ? data_.size() : end;
        line = std::string_view(data_).substr(pos_, stop - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = stop + 1;
        ++line_no_;
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::format, path_.string() + ":" + std::to_string(line_no_) + ": " + what);
    }

    std::size_t line_no() const { return line_no_; }

private:
    std::filesystem::path path_;
    std::string data_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_spaces(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

inline Corpus read_text_lines(const std::filesystem::path& path, std::size_t expected, const char* what) {
    LineReader in(path);
    Corpus out;
    std::string_view line;
    while (in.next(line)) out.emplace_back(line);
    // A trailing newline produces no extra record.
    if (out.size() != expected) {
        throw Error(ErrorKind::format, path.string() + ": expected " + std::to_string(expected) + " " + what +
                                           " lines, found " + std::to_string(out.size()));
    }
    return out;
}

inline void write_text_lines(const std::filesystem::path& path, const Corpus& docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].find_first_of("\r\n") != std::string::npos) {
            throw Error(ErrorKind::invalid_argument,
                        "document " + std::to_string(i) + " contains a line break and cannot be written");
        }
        out += docs[i];
        out += '\n';
    }
    io::write_file(path, out);
}

inline void append_float(std::string& out, float v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace detail

/// Parses the feature/label file plus optional text files.
inline Dataset parse_xmc_dataset(const std::filesystem::path& feature_path,
                                 const std::optional<std::filesystem::path>& labeltext_path = std::nullopt,
                                 const std::optional<std::filesystem::path>& instance_text_path = std::nullopt) {
    detail::LineReader in(feature_path);
    std::string_view line;
    if (!in.next(line)) in.fail("missing header \"N D L\"");
    const auto header = detail::split_spaces(line);
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t l = 0;
    if (header.size() != 3 || !detail::parse_number(header[0], n) || !detail::parse_number(header[1], d) ||
        !detail::parse_number(header[2], l)) {
        in.fail("malformed header, expected \"N D L\"");
    }

    std::vector<Triplet> labels;
    std::vector<Triplet> feats;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in.next(line)) in.fail("expected " + std::to_string(n) + " instances, file ends early");
        const bool leading_blank = !line.empty() && (line.front() == ' ' || line.front() == '\t');
        auto fields = detail::split_spaces(line);
        std::size_t first_feature = 0;
        if (!leading_blank && !fields.empty() && fields[0].find(':') == std::string_view::npos) {
            first_feature = 1;
            std::string_view lf = fields[0];
            std::vector<index_t> ids;
            while (true) {
                const auto comma = lf.find(',');
                const auto tok = lf.substr(0, comma);
                std::size_t id = 0;
                if (!detail::parse_number(tok, id)) in.fail("bad label id '" + std::string(tok) + "'");
                if (id >= l) in.fail("label id " + std::to_string(id) + " >= L=" + std::to_string(l));
                ids.push_back(static_cast<index_t>(id));
                if (comma == std::string_view::npos) break;
                lf = lf.substr(comma + 1);
            }
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            for (index_t id : ids) labels.push_back({static_cast<index_t>(i), id, 1.0f});
        }
        for (std::size_t f = first_feature; f < fields.size(); ++f) {
            const auto tok = fields[f];
            const auto colon = tok.find(':');
            std::size_t id = 0;
            float v = 0.0f;
            if (colon == std::string_view::npos || !detail::parse_number(tok.substr(0, colon), id) ||
                !detail::parse_number(tok.substr(colon + 1), v)) {
                in.fail("bad feature '" + std::string(tok) + "', expected id:value");
            }
            if (id >= d) in.fail("feature id " + std::to_string(id) + " >= D=" + std::to_string(d));
            feats.push_back({static_cast<index_t>(i), static_cast<index_t>(id), v});
        }
    }
    while (in.next(line)) {
        if (!detail::split_spaces(line).empty()) in.fail("unexpected content after " + std::to_string(n) + " instances");
    }

    Dataset ds;
    ds.y = from_coordinates(labels, n, l);
    if (d > 0) ds.features = from_coordinates(feats, n, d);
    if (labeltext_path) ds.labels = detail::read_text_lines(*labeltext_path, l, "label text");
    if (instance_text_path) ds.instances = detail::read_text_lines(*instance_text_path, n, "instance text");
    return ds;
}

/// Reads a directory produced by write_dataset; text files are optional.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> texts;
    if (std::filesystem::exists(dir / "label_text.txt")) labels = dir / "label_text.txt";
    if (std::filesystem::exists(dir / "instance_text.txt")) texts = dir / "instance_text.txt";
    Dataset ds = parse_xmc_dataset(dir / "features.txt", labels, texts);
    ds.split = dir.filename().string();
    return ds;
}

/// Canonical form: sorted label ids, sorted feature ids, shortest
/// round-trip float formatting.
inline std::string format_features(const Dataset& ds) {
    ds.validate();
    const std::size_t d = ds.features ? ds.features->cols() : 0;
    std::string out = std::to_string(ds.y.rows()) + " " + std::to_string(d) + " " + std::to_string(ds.y.cols()) + "\n";
    for (std::size_t i = 0; i < ds.y.rows(); ++i) {
        const RowView yl = ds.y.row(i);
        for (std::size_t p = 0; p < yl.nnz(); ++p) {
            if (p > 0) out += ',';
            out += std::to_string(yl.indices[p]);
        }
        if (ds.features) {
            const RowView fr = ds.features->row(i);
            for (std::size_t p = 0; p < fr.nnz(); ++p) {
                out += ' ';
                out += std::to_string(fr.indices[p]);
                out += ':';
                detail::append_float(out, fr.values[p]);
            }
        }
        out += '\n';
    }
    return out;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    io::write_file(dir / "features.txt", format_features(ds));
    if (!ds.instances.empty()) detail::write_text_lines(dir / "instance_text.txt", ds.instances);
    if (!ds.labels.empty()) detail::write_text_lines(dir / "label_text.txt", ds.labels);
}

}  // namespace pina_xmc
