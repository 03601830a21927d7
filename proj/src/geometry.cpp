#include "polyct/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "polyct/errors.hpp"
#include "polyct/model.hpp"
#include "polyct/rng.hpp"

namespace polyct {

// ---------------------------------------------------------------- SystemMatrix

SystemMatrix SystemMatrix::from_rows(std::size_t n_cols,
                                     std::vector<std::vector<std::pair<std::size_t, double>>> rows) {
    SystemMatrix m;
    m.n_rows_ = rows.size();
    m.n_cols_ = n_cols;
    m.row_offsets_.reserve(rows.size() + 1);
    m.row_offsets_.push_back(0);
    for (auto& row : rows) {
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t p = 0; p < row.size();) {
            const std::size_t col = row[p].first;
            if (col >= n_cols) {
                throw DimensionError("SystemMatrix: column " + std::to_string(col) + " out of range");
            }
            double w = 0.0;
            for (; p < row.size() && row[p].first == col; ++p) {
                w += row[p].second;
            }
            m.col_index_.push_back(static_cast<std::uint32_t>(col));
            m.values_.push_back(w);
        }
        m.row_offsets_.push_back(m.values_.size());
    }
    return m;
}

SystemMatrix SystemMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                         std::span<const Triplet> triplets) {
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(n_rows);
    for (const auto& t : triplets) {
        if (t.row >= n_rows) {
            throw DimensionError("SystemMatrix: row " + std::to_string(t.row) + " out of range");
        }
        rows[t.row].emplace_back(t.col, t.weight);
    }
    return from_rows(n_cols, std::move(rows));
}

SystemMatrix SystemMatrix::dense(std::size_t n_rows, std::size_t n_cols, Vec values) {
    if (values.size() != n_rows * n_cols) {
        throw DimensionError("SystemMatrix::dense: expected " + std::to_string(n_rows * n_cols) +
                             " values, got " + std::to_string(values.size()));
    }
    SystemMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.dense_ = true;
    m.values_ = std::move(values);
    return m;
}

SystemMatrix SystemMatrix::identity(std::size_t n) {
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].emplace_back(i, 1.0);
    }
    return from_rows(n, std::move(rows));
}

double SystemMatrix::row_dot(std::size_t i, std::span<const double> x) const {
    double s = 0.0;
    if (dense_) {
        const double* row = values_.data() + i * n_cols_;
        for (std::size_t k = 0; k < n_cols_; ++k) {
            s += row[k] * x[k];
        }
    } else {
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            s += values_[p] * x[col_index_[p]];
        }
    }
    return s;
}

double SystemMatrix::row_norm_squared(std::size_t i) const {
    double s = 0.0;
    for_each_in_row(i, [&](std::size_t, double v) { s += v * v; });
    return s;
}

double SystemMatrix::row_sum(std::size_t i) const {
    double s = 0.0;
    for_each_in_row(i, [&](std::size_t, double v) { s += v; });
    return s;
}

double SystemMatrix::min_entry() const {
    if (values_.empty()) {
        return 0.0;
    }
    return *std::min_element(values_.begin(), values_.end());
}

void SystemMatrix::multiply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != n_cols_ || out.size() != n_rows_) {
        throw DimensionError("SystemMatrix::multiply: dimension mismatch");
    }
    for (std::size_t i = 0; i < n_rows_; ++i) {
        out[i] = row_dot(i, x);
    }
}

Vec SystemMatrix::multiply(std::span<const double> x) const {
    Vec out(n_rows_);
    multiply(x, out);
    return out;
}

void SystemMatrix::multiply_transpose(std::span<const double> w, std::span<double> out) const {
    if (w.size() != n_rows_ || out.size() != n_cols_) {
        throw DimensionError("SystemMatrix::multiply_transpose: dimension mismatch");
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n_rows_; ++i) {
        if (w[i] != 0.0) {
            add_row(i, w[i], out);
        }
    }
}

Vec SystemMatrix::multiply_transpose(std::span<const double> w) const {
    Vec out(n_cols_);
    multiply_transpose(w, out);
    return out;
}

void SystemMatrix::add_row(std::size_t i, double scale, std::span<double> out) const {
    if (dense_) {
        const double* row = values_.data() + i * n_cols_;
        for (std::size_t k = 0; k < n_cols_; ++k) {
            out[k] += scale * row[k];
        }
    } else {
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            out[col_index_[p]] += scale * values_[p];
        }
    }
}

std::vector<Triplet> SystemMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(dense_ ? n_rows_ * n_cols_ : values_.size());
    for (std::size_t i = 0; i < n_rows_; ++i) {
        for_each_in_row(i, [&](std::size_t k, double v) { out.push_back({i, k, v}); });
    }
    return out;
}

// -------------------------------------------------------------------- geometry

void ParallelBeamGeometry::validate() const {
    if (n_views < 1 || n_cells < 1 || grid_side < 1) {
        throw std::invalid_argument("geometry: n_views, n_cells and grid_side must be >= 1");
    }
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
        throw std::invalid_argument("geometry: pixel_size must be positive");
    }
}

ParallelBeamGeometry::Ray ParallelBeamGeometry::ray(std::size_t i) const {
    const std::size_t view = i / n_cells;
    const std::size_t cell = i % n_cells;
    const double theta = std::numbers::pi * static_cast<double>(view) / static_cast<double>(n_views);
    const double span = std::numbers::sqrt2 * extent();
    const double s = -0.5 * span + (static_cast<double>(cell) + 0.5) * span / static_cast<double>(n_cells);
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    return Ray{-s * sn, s * c, c, sn};
}

ParallelBeamGeometry default_geometry(std::size_t n_views, std::size_t grid_side) {
    ParallelBeamGeometry g;
    g.n_views = n_views;
    g.n_cells = 50;
    g.grid_side = grid_side;
    g.pixel_size = 1.0 / static_cast<double>(grid_side);
    return g;
}

namespace {

constexpr double kParallel = 1e-15;

// Parameter interval of the ray inside [-h, h]^2; empty when lo >= hi.
bool clip_to_box(const ParallelBeamGeometry::Ray& r, double h, double& lo, double& hi) {
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    const double o[2] = {r.ox, r.oy};
    const double d[2] = {r.dx, r.dy};
    for (int a = 0; a < 2; ++a) {
        if (std::fabs(d[a]) < kParallel) {
            if (o[a] < -h || o[a] > h) {
                return false;
            }
            continue;
        }
        double t0 = (-h - o[a]) / d[a];
        double t1 = (h - o[a]) / d[a];
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    return hi > lo;
}

void trace_ray(const ParallelBeamGeometry& g, const ParallelBeamGeometry::Ray& r,
               std::vector<std::pair<std::size_t, double>>& row, std::vector<double>& params) {
    const double h = 0.5 * g.extent();
    double lo = 0.0;
    double hi = 0.0;
    if (!clip_to_box(r, h, lo, hi)) {
        return;
    }
    const std::size_t n = g.grid_side;
    params.clear();
    params.push_back(lo);
    params.push_back(hi);
    const double o[2] = {r.ox, r.oy};
    const double d[2] = {r.dx, r.dy};
    for (int a = 0; a < 2; ++a) {
        if (std::fabs(d[a]) < kParallel) {
            continue;
        }
        for (std::size_t k = 1; k < n; ++k) {
            const double line = -h + static_cast<double>(k) * g.pixel_size;
            const double t = (line - o[a]) / d[a];
            if (t > lo && t < hi) {
                params.push_back(t);
            }
        }
    }
    std::sort(params.begin(), params.end());
    const double eps = 1e-12 * g.pixel_size;
    for (std::size_t p = 0; p + 1 < params.size(); ++p) {
        const double len = params[p + 1] - params[p];
        if (len <= eps) {
            continue;
        }
        const double mid = 0.5 * (params[p] + params[p + 1]);
        const double mx = r.ox + mid * r.dx;
        const double my = r.oy + mid * r.dy;
        const auto cell = [&](double v) {
            const double f = std::floor((v + h) / g.pixel_size);
            return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
        };
        row.emplace_back(cell(my) * n + cell(mx), len);
    }
}

} // namespace

SystemMatrix build_radon_matrix(const ParallelBeamGeometry& geom) {
    geom.validate();
    const std::size_t n_rays = geom.rays();
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(n_rays);
    std::vector<double> params;
    for (std::size_t i = 0; i < n_rays; ++i) {
        trace_ray(geom, geom.ray(i), rows[i], params);
    }
    return SystemMatrix::from_rows(geom.grid_side * geom.grid_side, std::move(rows));
}

double chord_length(const ParallelBeamGeometry& geom, std::size_t i) {
    double lo = 0.0;
    double hi = 0.0;
    if (!clip_to_box(geom.ray(i), 0.5 * geom.extent(), lo, hi)) {
        return 0.0;
    }
    return hi - lo;
}

SystemMatrix build_gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n < 1 || d < 1) {
        throw std::invalid_argument("build_gaussian_matrix: n and d must be >= 1");
    }
    CounterRng rng(seed, 0x6d6174ULL);
    Vec values(n * d);
    for (double& v : values) {
        v = rng.normal();
    }
    return SystemMatrix::dense(n, d, std::move(values));
}

// -------------------------------------------------------------------- phantoms

Image blank_image(std::size_t side) { return Image{side, Vec(side * side, 0.0)}; }

bool Disc::contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    return dx * dx + dy * dy <= radius * radius;
}

double pixel_x(std::size_t side, std::size_t c) {
    return static_cast<double>(c) + 0.5 - 0.5 * static_cast<double>(side);
}

double pixel_y(std::size_t side, std::size_t r) {
    return static_cast<double>(r) + 0.5 - 0.5 * static_cast<double>(side);
}

std::vector<Disc> pmma_rois(std::size_t grid_side) {
    const double s = static_cast<double>(grid_side);
    const double off = 0.225 * s;
    const double rad = 0.1 * s;
    return {
        {off, off, rad, 0.5},
        {-off, off, rad, 0.8},
        {-off, -off, rad, 1.2},
        {off, -off, rad, 1.5},
    };
}

Image make_pmma_phantom(std::size_t grid_side) {
    if (grid_side < 8) {
        throw std::invalid_argument("make_pmma_phantom: grid_side must be >= 8 to place the ROIs");
    }
    const Disc body{0.0, 0.0, 0.45 * static_cast<double>(grid_side), 1.0};
    const auto rois = pmma_rois(grid_side);
    Image img = blank_image(grid_side);
    for (std::size_t r = 0; r < grid_side; ++r) {
        for (std::size_t c = 0; c < grid_side; ++c) {
            const double x = pixel_x(grid_side, c);
            const double y = pixel_y(grid_side, r);
            if (!body.contains(x, y)) {
                continue;
            }
            double v = body.density;
            for (const auto& roi : rois) {
                if (roi.contains(x, y)) {
                    v = roi.density;
                }
            }
            img.at(r, c) = v;
        }
    }
    return img;
}

double region_mean(const Image& image, const Disc& region) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < image.side; ++r) {
        for (std::size_t c = 0; c < image.side; ++c) {
            if (region.contains(pixel_x(image.side, c), pixel_y(image.side, r))) {
                sum += image.at(r, c);
                ++count;
            }
        }
    }
    if (count == 0) {
        throw std::invalid_argument("region_mean: region covers no pixel centers");
    }
    return sum / static_cast<double>(count);
}

Vec ContrastScenario::background_exponents(const SystemMatrix& A) const {
    if (A.cols() != water.values.size()) {
        throw DimensionError("background_exponents: matrix columns do not match the scenario grid");
    }
    const std::size_t bins = water_attenuation.size();
    const Vec pw = A.multiply(water.values);
    const Vec pb = A.multiply(bone.values);
    Vec out(A.rows() * bins);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < bins; ++j) {
            // Clamp rounding noise so exponents stay nonnegative.
            out[i * bins + j] =
                std::max(0.0, water_attenuation[j] * pw[i] + bone_attenuation[j] * pb[i]);
        }
    }
    return out;
}

ContrastScenario make_contrast_scenario(std::size_t grid_side, std::size_t bins, double background_scale) {
    if (grid_side < 16) {
        throw std::invalid_argument("make_contrast_scenario: grid_side must be >= 16");
    }
    if (!(background_scale >= 0.0)) {
        throw std::invalid_argument("make_contrast_scenario: background_scale must be >= 0");
    }
    const double s = static_cast<double>(grid_side);
    ContrastScenario sc;
    sc.side = grid_side;
    sc.water = blank_image(grid_side);
    sc.bone = blank_image(grid_side);
    sc.iodine = blank_image(grid_side);

    const double ring = 0.22 * s;
    const double concentrations[3] = {0.2, 0.5, 1.0};
    const double angles[3] = {90.0, 210.0, 330.0};
    for (int k = 0; k < 3; ++k) {
        const double a = angles[k] * std::numbers::pi / 180.0;
        sc.iodine_rois.push_back({ring * std::cos(a), ring * std::sin(a), 0.08 * s, concentrations[k]});
    }

    const double r_water = 0.42 * s;
    const double r_bone = 0.47 * s;
    for (std::size_t r = 0; r < grid_side; ++r) {
        for (std::size_t c = 0; c < grid_side; ++c) {
            const double x = pixel_x(grid_side, c);
            const double y = pixel_y(grid_side, r);
            const double rr = std::hypot(x, y);
            bool in_iodine = false;
            for (const auto& roi : sc.iodine_rois) {
                if (roi.contains(x, y)) {
                    sc.iodine.at(r, c) = roi.density;
                    in_iodine = true;
                }
            }
            if (rr <= r_water && !in_iodine) {
                sc.water.at(r, c) = background_scale;
            } else if (rr > r_water && rr <= r_bone) {
                sc.bone.at(r, c) = background_scale;
            }
        }
    }

    // Invented smooth attenuation tables on the default energy grid. Iodine
    // carries a K-edge jump at 60% of the band.
    const Vec mu = default_attenuations(bins);
    const std::size_t edge = (bins * 3) / 5;
    sc.water_attenuation.resize(bins);
    sc.bone_attenuation.resize(bins);
    sc.iodine_attenuation.resize(bins);
    for (std::size_t j = 0; j < bins; ++j) {
        sc.water_attenuation[j] = 0.4 * std::pow(mu[j], 0.6);
        sc.bone_attenuation[j] = 1.2 * std::pow(mu[j], 0.8);
        sc.iodine_attenuation[j] = 1.5 * std::pow(mu[j], 0.7) * (j >= edge ? 3.0 : 1.0);
    }
    return sc;
}

} // namespace polyct
