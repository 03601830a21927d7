#include "polyct/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "polyct/errors.hpp"

namespace polyct {

ForwardModel::ForwardModel(std::shared_ptr<const SystemMatrix> A, WindowedSpectra spectra)
    : A_(std::move(A)), spectra_(std::move(spectra.windows)), n_windows_(spectra_.size()) {
    init();
}

ForwardModel::ForwardModel(std::shared_ptr<const SystemMatrix> A,
                           std::vector<std::vector<Spectrum>> per_ray)
    : A_(std::move(A)), n_windows_(per_ray.size()), per_ray_(true) {
    for (std::size_t w = 0; w < per_ray.size(); ++w) {
        if (A_ && per_ray[w].size() != A_->rows()) {
            throw DimensionError("ForwardModel: window " + std::to_string(w) + " has " +
                                 std::to_string(per_ray[w].size()) + " spectra for " +
                                 std::to_string(A_->rows()) + " rays");
        }
        for (auto& s : per_ray[w]) {
            spectra_.push_back(std::move(s));
        }
    }
    init();
}

void ForwardModel::init() {
    if (!A_) {
        throw std::invalid_argument("ForwardModel: missing system matrix");
    }
    if (n_windows_ == 0) {
        throw std::invalid_argument("ForwardModel: at least one window is required");
    }
    for (std::size_t k = 0; k < spectra_.size(); ++k) {
        try {
            spectra_[k].validate();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("spectrum " + std::to_string(k) + ": " + e.what());
        }
    }
    shared_attenuations_ = std::all_of(spectra_.begin(), spectra_.end(), [&](const Spectrum& s) {
        return s.attenuations == spectra_.front().attenuations;
    });
}

const Spectrum& ForwardModel::spectrum(std::size_t m) const {
    return per_ray_ ? spectra_[m] : spectra_[m / A_->rows()];
}

void ForwardModel::means(std::span<const double> proj, std::span<double> out) const {
    const std::size_t n = rows();
    if (proj.size() != n || out.size() != measurements()) {
        throw DimensionError("ForwardModel::means: dimension mismatch");
    }
    if (!shared_attenuations_) {
        for (std::size_t m = 0; m < out.size(); ++m) {
            const Spectrum& s = spectrum(m);
            out[m] = s.intensity * s.response(proj[m % n]);
        }
        return;
    }
    const Vec& mu = spectra_.front().attenuations;
    const std::size_t bins = mu.size();
    Vec ex(bins);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = proj[i] > 0.0 ? proj[i] : 0.0;
        for (std::size_t j = 0; j < bins; ++j) {
            ex[j] = std::exp(-mu[j] * t);
        }
        for (std::size_t w = 0; w < n_windows_; ++w) {
            const std::size_t m = w * n + i;
            const Spectrum& s = spectrum(m);
            double h = 0.0;
            for (std::size_t j = 0; j < bins; ++j) {
                h += s.weights[j] * ex[j];
            }
            out[m] = s.intensity * h;
        }
    }
}

void ForwardModel::means_and_slopes(std::span<const double> proj, std::span<double> mean,
                                    std::span<double> slope) const {
    const std::size_t n = rows();
    if (proj.size() != n || mean.size() != measurements() || slope.size() != measurements()) {
        throw DimensionError("ForwardModel::means_and_slopes: dimension mismatch");
    }
    for (std::size_t m = 0; m < mean.size(); ++m) {
        const Spectrum& s = spectrum(m);
        const double t = proj[m % n];
        mean[m] = s.intensity * s.response(t);
        slope[m] = s.intensity * s.response_derivative(t);
    }
}

MeasurementSet ForwardModel::expected(std::span<const double> x) const {
    if (x.size() != dim()) {
        throw DimensionError("ForwardModel::expected: image has " + std::to_string(x.size()) +
                             " entries, matrix has " + std::to_string(dim()) + " columns");
    }
    const Vec proj = A_->multiply(x);
    Vec counts(measurements());
    means(proj, counts);
    return to_measurements(*this, std::move(counts));
}

Vec ForwardModel::operator_F(std::span<const double> y, std::span<const double> x) const {
    Vec proj(rows());
    Vec mean(measurements());
    Vec out(dim());
    operator_F(y, x, proj, mean, out);
    return out;
}

void ForwardModel::operator_F(std::span<const double> y, std::span<const double> x,
                              std::span<double> proj, std::span<double> mean,
                              std::span<double> out) const {
    if (y.size() != measurements()) {
        throw DimensionError("operator_F: expected " + std::to_string(measurements()) +
                             " measurements, got " + std::to_string(y.size()));
    }
    if (x.size() != dim()) {
        throw DimensionError("operator_F: image has " + std::to_string(x.size()) +
                             " entries, matrix has " + std::to_string(dim()) + " columns");
    }
    A_->multiply(x, proj);
    means(proj, mean);
    const std::size_t n = rows();
    // Collapse windows onto rays so A^T is applied once.
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t w = 0; w < n_windows_; ++w) {
            const std::size_t m = w * n + i;
            r += y[m] - mean[m];
        }
        proj[i] = r / static_cast<double>(measurements());
    }
    A_->multiply_transpose(proj, out);
}

double ForwardModel::slope_bound() const {
    double total = 0.0;
    const std::size_t per_window = per_ray_ ? rows() : 1;
    for (std::size_t w = 0; w < n_windows_; ++w) {
        double best = 0.0;
        for (std::size_t k = 0; k < per_window; ++k) {
            const Spectrum& s = spectra_[w * per_window + k];
            best = std::max(best, s.intensity * s.slope_sum());
        }
        total += best;
    }
    return total;
}

double ForwardModel::max_attenuation() const {
    double mx = 0.0;
    for (const auto& s : spectra_) {
        mx = std::max(mx, s.max_attenuation());
    }
    return mx;
}

MeasurementSet to_measurements(const ForwardModel& model, Vec counts) {
    if (counts.size() != model.measurements()) {
        throw DimensionError("to_measurements: expected " + std::to_string(model.measurements()) +
                             " counts, got " + std::to_string(counts.size()));
    }
    MeasurementSet out;
    out.counts = std::move(counts);
    for (std::size_t w = 0; w <= model.windows(); ++w) {
        out.window_offsets.push_back(w * model.rows());
    }
    return out;
}

} // namespace polyct
