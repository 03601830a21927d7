#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polyct {

using Vec = std::vector<double>;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double weight;
};

// n x d ray-weight matrix. Radon matrices are stored as compressed sparse
// rows; Gaussian matrices are dense row-major.
class SystemMatrix {
public:
    SystemMatrix() = default;

    // Builds CSR storage from per-row (column, weight) lists. Duplicate columns
    // within a row are summed and each row is sorted by column.
    static SystemMatrix from_rows(std::size_t n_cols,
                                  std::vector<std::vector<std::pair<std::size_t, double>>> rows);
    static SystemMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                      std::span<const Triplet> triplets);
    static SystemMatrix dense(std::size_t n_rows, std::size_t n_cols, Vec values);
    static SystemMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t cols() const noexcept { return n_cols_; }
    bool is_dense() const noexcept { return dense_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    double row_dot(std::size_t i, std::span<const double> x) const;
    double row_norm_squared(std::size_t i) const;
    double row_sum(std::size_t i) const;
    double min_entry() const;

    // out = A x
    void multiply(std::span<const double> x, std::span<double> out) const;
    Vec multiply(std::span<const double> x) const;
    // out = A^T w
    void multiply_transpose(std::span<const double> w, std::span<double> out) const;
    Vec multiply_transpose(std::span<const double> w) const;
    // out += scale * a_i
    void add_row(std::size_t i, double scale, std::span<double> out) const;

    template <class Fn>
    void for_each_in_row(std::size_t i, Fn&& fn) const {
        if (dense_) {
            const double* row = values_.data() + i * n_cols_;
            for (std::size_t k = 0; k < n_cols_; ++k) {
                fn(k, row[k]);
            }
        } else {
            for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
                fn(static_cast<std::size_t>(col_index_[p]), values_[p]);
            }
        }
    }

    std::vector<Triplet> triplets() const;
    std::string format() const { return dense_ ? "dense" : "sparse"; }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    bool dense_ = false;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::uint32_t> col_index_;
    Vec values_;
};

} // namespace polyct
