#pragma once

// Compressed sparse row storage and the small set of exact kernels the rest
// of the library is built on. Values are f32; every accumulation runs in f64
// and is rounded once at the end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/error.hpp"

namespace pina_xmc {

using index_t = std::uint32_t;

struct Triplet {
    std::size_t row;
    std::size_t col;
    float value;
};

/// Read-only view of one CSR row.
struct RowView {
    std::span<const index_t> indices;
    std::span<const float> values;

    std::size_t nnz() const { return indices.size(); }
};

struct SparseVector {
    std::size_t dim = 0;
    std::vector<index_t> indices;
    std::vector<float> values;

    SparseVector() = default;
    explicit SparseVector(std::size_t d) : dim(d) {}

    std::size_t nnz() const { return indices.size(); }
    RowView view() const { return {indices, values}; }
    bool operator==(const SparseVector&) const = default;

    /// Builds a canonical vector from unordered (index, value) pairs:
    /// duplicates summed, exact zeros dropped.
    static SparseVector from_pairs(std::size_t dim, std::vector<std::pair<index_t, double>> pairs) {
        std::stable_sort(pairs.begin(), pairs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        SparseVector out(dim);
        for (std::size_t p = 0; p < pairs.size();) {
            const index_t idx = pairs[p].first;
            if (idx >= dim) {
                throw Error(ErrorKind::out_of_range,
                            "index " + std::to_string(idx) + " >= dim " + std::to_string(dim));
            }
            double sum = 0.0;
            for (; p < pairs.size() && pairs[p].first == idx; ++p) sum += pairs[p].second;
            const auto value = static_cast<float>(sum);
            if (value != 0.0f) {
                out.indices.push_back(idx);
                out.values.push_back(value);
            }
        }
        return out;
    }

    static SparseVector from_dense(std::span<const float> dense) {
        SparseVector out(dense.size());
        for (std::size_t j = 0; j < dense.size(); ++j) {
            if (dense[j] != 0.0f) {
                out.indices.push_back(static_cast<index_t>(j));
                out.values.push_back(dense[j]);
            }
        }
        return out;
    }

    std::vector<float> to_dense() const {
        std::vector<float> dense(dim, 0.0f);
        for (std::size_t p = 0; p < nnz(); ++p) dense[indices[p]] = values[p];
        return dense;
    }
};

class SparseMatrix {
public:
    SparseMatrix() : row_offsets_(1, 0) {}
    SparseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

    /// Adopts raw CSR arrays; throws unless they are canonical.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> row_offsets,
                 std::vector<index_t> col_indices, std::vector<float> values)
        : rows_(rows),
          cols_(cols),
          row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)),
          values_(std::move(values)) {
        validate();
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    const std::vector<std::uint64_t>& row_offsets() const { return row_offsets_; }
    const std::vector<index_t>& col_indices() const { return col_indices_; }
    const std::vector<float>& values() const { return values_; }

    RowView row(std::size_t i) const {
        const auto begin = static_cast<std::size_t>(row_offsets_[i]);
        const auto len = static_cast<std::size_t>(row_offsets_[i + 1]) - begin;
        return {std::span<const index_t>(col_indices_).subspan(begin, len),
                std::span<const float>(values_).subspan(begin, len)};
    }

    SparseVector row_vector(std::size_t i) const {
        const RowView r = row(i);
        SparseVector v(cols_);
        v.indices.assign(r.indices.begin(), r.indices.end());
        v.values.assign(r.values.begin(), r.values.end());
        return v;
    }

    /// Value at (i, j), zero when not stored. Binary search within the row.
    float at(std::size_t i, std::size_t j) const {
        const RowView r = row(i);
        auto it = std::lower_bound(r.indices.begin(), r.indices.end(), static_cast<index_t>(j));
        if (it == r.indices.end() || *it != j) return 0.0f;
        return r.values[static_cast<std::size_t>(it - r.indices.begin())];
    }

    bool operator==(const SparseMatrix&) const = default;

    /// Throws a format error naming the first violated CSR invariant.
    void validate() const {
        auto fail = [](const std::string& what) { throw Error(ErrorKind::format, "non-canonical CSR: " + what); };
        if (row_offsets_.size() != rows_ + 1) fail("row_offsets length != rows+1");
        if (row_offsets_.front() != 0) fail("row_offsets[0] != 0");
        if (row_offsets_.back() != values_.size()) fail("row_offsets[rows] != nnz");
        if (col_indices_.size() != values_.size()) fail("col_indices and values differ in length");
        for (std::size_t i = 0; i < rows_; ++i) {
            if (row_offsets_[i] > row_offsets_[i + 1]) fail("row_offsets decreasing at row " + std::to_string(i));
            for (auto p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
                if (col_indices_[p] >= cols_) fail("column out of range in row " + std::to_string(i));
                if (p > row_offsets_[i] && col_indices_[p] <= col_indices_[p - 1]) {
                    fail("columns not strictly increasing in row " + std::to_string(i));
                }
                if (values_[p] == 0.0f) fail("explicit zero in row " + std::to_string(i));
            }
        }
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> row_offsets_;
    std::vector<index_t> col_indices_;
    std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// Construction

inline SparseMatrix from_coordinates(std::span<const Triplet> triplets, std::size_t rows, std::size_t cols) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) {
            throw Error(ErrorKind::out_of_range, "triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                                                     ", " + std::to_string(t.value) + ") outside " +
                                                     shape_str(rows, cols));
        }
    }
    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ta = triplets[a];
        const auto& tb = triplets[b];
        return ta.row != tb.row ? ta.row < tb.row : ta.col < tb.col;
    });

    std::vector<std::uint64_t> offsets(rows + 1, 0);
    std::vector<index_t> col_indices;
    std::vector<float> values;
    for (std::size_t p = 0; p < order.size();) {
        const auto& first = triplets[order[p]];
        double sum = 0.0;
        std::size_t q = p;
        for (; q < order.size() && triplets[order[q]].row == first.row && triplets[order[q]].col == first.col; ++q) {
            sum += triplets[order[q]].value;
        }
        const auto value = static_cast<float>(sum);
        if (value != 0.0f) {
            col_indices.push_back(static_cast<index_t>(first.col));
            values.push_back(value);
            ++offsets[first.row + 1];
        }
        p = q;
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return SparseMatrix(rows, cols, std::move(offsets), std::move(col_indices), std::move(values));
}

inline SparseMatrix from_coordinates(const std::vector<Triplet>& triplets, std::size_t rows, std::size_t cols) {
    return from_coordinates(std::span<const Triplet>(triplets), rows, cols);
}

/// Stacks canonical row vectors; every row must have dim == cols.
inline SparseMatrix from_rows(std::span<const SparseVector> rows, std::size_t cols) {
    std::vector<std::uint64_t> offsets(rows.size() + 1, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].dim != cols) {
            throw Error(ErrorKind::shape_mismatch, "row " + std::to_string(i) + " has dim " +
                                                       std::to_string(rows[i].dim) + ", expected " +
                                                       std::to_string(cols));
        }
        total += rows[i].nnz();
        offsets[i + 1] = total;
    }
    std::vector<index_t> col_indices;
    std::vector<float> values;
    col_indices.reserve(total);
    values.reserve(total);
    for (const auto& r : rows) {
        col_indices.insert(col_indices.end(), r.indices.begin(), r.indices.end());
        values.insert(values.end(), r.values.begin(), r.values.end());
    }
    return SparseMatrix(rows.size(), cols, std::move(offsets), std::move(col_indices), std::move(values));
}

inline SparseMatrix from_rows(const std::vector<SparseVector>& rows, std::size_t cols) {
    return from_rows(std::span<const SparseVector>(rows), cols);
}

inline SparseMatrix from_dense(const std::vector<std::vector<float>>& dense, std::size_t cols) {
    std::vector<SparseVector> rows;
    rows.reserve(dense.size());
    for (const auto& r : dense) {
        if (r.size() != cols) throw Error(ErrorKind::shape_mismatch, "ragged dense input");
        rows.push_back(SparseVector::from_dense(r));
    }
    return from_rows(rows, cols);
}

inline std::vector<std::vector<float>> to_dense(const SparseMatrix& m) {
    std::vector<std::vector<float>> dense(m.rows(), std::vector<float>(m.cols(), 0.0f));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const RowView r = m.row(i);
        for (std::size_t p = 0; p < r.nnz(); ++p) dense[i][r.indices[p]] = r.values[p];
    }
    return dense;
}

inline SparseMatrix identity(std::size_t n) {
    std::vector<std::uint64_t> offsets(n + 1);
    std::iota(offsets.begin(), offsets.end(), std::uint64_t{0});
    std::vector<index_t> cols(n);
    std::iota(cols.begin(), cols.end(), index_t{0});
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<float>(n, 1.0f));
}

// ---------------------------------------------------------------------------
// Structural operations

inline SparseMatrix transpose(const SparseMatrix& m) {
    std::vector<std::uint64_t> offsets(m.cols() + 1, 0);
    for (index_t c : m.col_indices()) ++offsets[c + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<index_t> col_indices(m.nnz());
    std::vector<float> values(m.nnz());
    std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    // Rows are visited in order, so each output row is filled in increasing column order.
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const RowView r = m.row(i);
        for (std::size_t p = 0; p < r.nnz(); ++p) {
            const auto dst = cursor[r.indices[p]]++;
            col_indices[dst] = static_cast<index_t>(i);
            values[dst] = r.values[p];
        }
    }
    return SparseMatrix(m.cols(), m.rows(), std::move(offsets), std::move(col_indices), std::move(values));
}

/// Assembles [[a, b], [c, d]].
inline SparseMatrix block_2x2(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c,
                              const SparseMatrix& d) {
    auto check = [](const char* what, std::size_t expected, std::size_t actual) {
        if (expected != actual) {
            throw Error(ErrorKind::shape_mismatch, std::string(what) + ": expected " + std::to_string(expected) +
                                                       ", got " + std::to_string(actual));
        }
    };
    check("rows(B) vs rows(A)", a.rows(), b.rows());
    check("rows(D) vs rows(C)", c.rows(), d.rows());
    check("cols(C) vs cols(A)", a.cols(), c.cols());
    check("cols(D) vs cols(B)", b.cols(), d.cols());

    const std::size_t rows = a.rows() + c.rows();
    const std::size_t cols = a.cols() + b.cols();
    const auto left_width = static_cast<index_t>(a.cols());
    std::vector<std::uint64_t> offsets(rows + 1, 0);
    std::vector<index_t> col_indices;
    std::vector<float> values;
    col_indices.reserve(a.nnz() + b.nnz() + c.nnz() + d.nnz());
    values.reserve(col_indices.capacity());

    auto append = [&](const SparseMatrix& left, const SparseMatrix& right, std::size_t row_base) {
        for (std::size_t i = 0; i < left.rows(); ++i) {
            const RowView l = left.row(i);
            const RowView r = right.row(i);
            col_indices.insert(col_indices.end(), l.indices.begin(), l.indices.end());
            values.insert(values.end(), l.values.begin(), l.values.end());
            for (std::size_t p = 0; p < r.nnz(); ++p) {
                col_indices.push_back(r.indices[p] + left_width);
                values.push_back(r.values[p]);
            }
            offsets[row_base + i + 1] = values.size();
        }
    };
    append(a, b, 0);
    append(c, d, a.rows());
    return SparseMatrix(rows, cols, std::move(offsets), std::move(col_indices), std::move(values));
}

/// Copies the rows x cols window starting at (row0, col0).
inline SparseMatrix extract_block(const SparseMatrix& m, std::size_t row0, std::size_t col0, std::size_t rows,
                                  std::size_t cols) {
    if (row0 + rows > m.rows() || col0 + cols > m.cols()) {
        throw Error(ErrorKind::shape_mismatch, "block window exceeds " + shape_str(m.rows(), m.cols()));
    }
    std::vector<std::uint64_t> offsets(rows + 1, 0);
    std::vector<index_t> col_indices;
    std::vector<float> values;
    for (std::size_t i = 0; i < rows; ++i) {
        const RowView r = m.row(row0 + i);
        for (std::size_t p = 0; p < r.nnz(); ++p) {
            if (r.indices[p] >= col0 && r.indices[p] < col0 + cols) {
                col_indices.push_back(static_cast<index_t>(r.indices[p] - col0));
                values.push_back(r.values[p]);
            }
        }
        offsets[i + 1] = values.size();
    }
    return SparseMatrix(rows, cols, std::move(offsets), std::move(col_indices), std::move(values));
}

inline SparseMatrix select_rows(const SparseMatrix& m, std::span<const index_t> rows) {
    std::vector<SparseVector> out;
    out.reserve(rows.size());
    for (index_t i : rows) {
        if (i >= m.rows()) throw Error(ErrorKind::out_of_range, "row " + std::to_string(i) + " out of range");
        out.push_back(m.row_vector(i));
    }
    return from_rows(out, m.cols());
}

/// Horizontal concatenation [a, b].
inline SparseMatrix hstack(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw Error(ErrorKind::shape_mismatch, "hstack rows: " + std::to_string(a.rows()) + " vs " +
                                                   std::to_string(b.rows()));
    }
    SparseMatrix empty_top(0, a.cols());
    SparseMatrix empty_bottom(0, b.cols());
    return block_2x2(a, b, empty_top, empty_bottom);
}

// ---------------------------------------------------------------------------
// Numeric kernels

inline double squared_norm(RowView r) {
    double s = 0.0;
    for (float v : r.values) s += static_cast<double>(v) * v;
    return s;
}

inline double norm(RowView r) { return std::sqrt(squared_norm(r)); }

inline SparseVector l2_normalize(const SparseVector& v) {
    const double n = norm(v.view());
    if (n == 0.0) return v;
    SparseVector out(v.dim);
    for (std::size_t p = 0; p < v.nnz(); ++p) {
        const auto value = static_cast<float>(v.values[p] / n);
        if (value != 0.0f) {
            out.indices.push_back(v.indices[p]);
            out.values.push_back(value);
        }
    }
    return out;
}

/// Zero rows pass through unchanged.
inline SparseMatrix l2_normalize_rows(const SparseMatrix& m) {
    std::vector<SparseVector> rows;
    rows.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(l2_normalize(m.row_vector(i)));
    return from_rows(rows, m.cols());
}

namespace detail {
// Positions of the k largest values; ties go to the smaller index. Returned
// positions are sorted ascending so the caller can emit canonical output.
inline std::vector<std::size_t> top_k_positions(std::span<const float> values, std::span<const index_t> indices,
                                                std::size_t k) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return indices[a] < indices[b];
    };
    if (order.size() > k) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
        order.resize(k);
    }
    std::sort(order.begin(), order.end());
    return order;
}
}  // namespace detail

inline SparseVector top_k(const SparseVector& v, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "top-k requires k >= 1");
    SparseVector out(v.dim);
    for (std::size_t p : detail::top_k_positions(v.values, v.indices, k)) {
        out.indices.push_back(v.indices[p]);
        out.values.push_back(v.values[p]);
    }
    return out;
}

/// Top-k over a dense score row. Selected zeros are not stored.
inline SparseVector top_k(std::span<const float> dense, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "top-k requires k >= 1");
    std::vector<index_t> all(dense.size());
    std::iota(all.begin(), all.end(), index_t{0});
    SparseVector out(dense.size());
    for (std::size_t p : detail::top_k_positions(dense, all, k)) {
        if (dense[p] != 0.0f) {
            out.indices.push_back(static_cast<index_t>(p));
            out.values.push_back(dense[p]);
        }
    }
    return out;
}

inline SparseMatrix top_k_per_row(const SparseMatrix& m, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "top-k requires k >= 1");
    std::vector<SparseVector> rows;
    rows.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(top_k(m.row_vector(i), k));
    return from_rows(rows, m.cols());
}

/// Sparse-sparse inner product; both index lists ascending, so the
/// accumulation order is fixed.
inline double row_dot(RowView w, RowView x) {
    double s = 0.0;
    std::size_t p = 0;
    std::size_t q = 0;
    while (p < w.nnz() && q < x.nnz()) {
        if (w.indices[p] < x.indices[q]) {
            ++p;
        } else if (w.indices[p] > x.indices[q]) {
            ++q;
        } else {
            s += static_cast<double>(w.values[p]) * x.values[q];
            ++p;
            ++q;
        }
    }
    return s;
}

inline double row_dot(const SparseVector& w, const SparseVector& x) {
    if (w.dim != x.dim) {
        throw Error(ErrorKind::shape_mismatch, "dot dims " + std::to_string(w.dim) + " vs " + std::to_string(x.dim));
    }
    return row_dot(w.view(), x.view());
}

inline double row_dot(std::span<const float> w, const SparseVector& x) {
    if (w.size() != x.dim) {
        throw Error(ErrorKind::shape_mismatch, "dot dims " + std::to_string(w.size()) + " vs " + std::to_string(x.dim));
    }
    double s = 0.0;
    for (std::size_t p = 0; p < x.nnz(); ++p) s += static_cast<double>(w[x.indices[p]]) * x.values[p];
    return s;
}

// ---------------------------------------------------------------------------
// Binary "XMCM" format: magic, u32 version, u64 rows, u64 cols, u64 nnz,
// u64 row_offsets[rows+1], u32 col_indices[nnz], f32 values[nnz]; all LE.

inline constexpr char kMatrixMagic[4] = {'X', 'M', 'C', 'M'};
inline constexpr std::uint32_t kMatrixVersion = 1;

inline void write_matrix(std::ostream& os, const SparseMatrix& m) {
    os.write(kMatrixMagic, 4);
    io::write_le<std::uint32_t>(os, kMatrixVersion);
    io::write_le<std::uint64_t>(os, m.rows());
    io::write_le<std::uint64_t>(os, m.cols());
    io::write_le<std::uint64_t>(os, m.nnz());
    for (auto off : m.row_offsets()) io::write_le<std::uint64_t>(os, off);
    for (auto c : m.col_indices()) io::write_le<std::uint32_t>(os, c);
    for (auto v : m.values()) io::write_f32(os, v);
}

inline SparseMatrix read_matrix(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMatrixMagic)) {
        throw Error(ErrorKind::format, "bad magic bytes, expected XMCM");
    }
    const auto version = io::read_le<std::uint32_t>(is, "version");
    if (version != kMatrixVersion) {
        throw Error(ErrorKind::format, "unsupported matrix format version " + std::to_string(version));
    }
    const auto rows = io::read_le<std::uint64_t>(is, "rows");
    const auto cols = io::read_le<std::uint64_t>(is, "cols");
    const auto nnz = io::read_le<std::uint64_t>(is, "nnz");
    std::vector<std::uint64_t> offsets(rows + 1);
    for (auto& off : offsets) off = io::read_le<std::uint64_t>(is, "row_offsets");
    std::vector<index_t> col_indices(nnz);
    for (auto& c : col_indices) c = io::read_le<std::uint32_t>(is, "col_indices");
    std::vector<float> values(nnz);
    for (auto& v : values) v = io::read_f32(is, "values");
    return SparseMatrix(rows, cols, std::move(offsets), std::move(col_indices), std::move(values));
}

inline void save_matrix(const std::filesystem::path& path, const SparseMatrix& m) {
    auto os = io::open_out(path);
    write_matrix(os, m);
    if (!os) throw Error(ErrorKind::io, "write failed: " + path.string());
}

inline SparseMatrix load_matrix(const std::filesystem::path& path) {
    auto is = io::open_in(path);
    try {
        return read_matrix(is);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

}  // namespace pina_xmc
