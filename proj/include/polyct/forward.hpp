#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "polyct/model.hpp"
#include "polyct/system_matrix.hpp"

namespace polyct {

// System matrix plus one spectrum per stacked measurement. Measurement m
// belongs to ray m % rows() and window m / rows().
class ForwardModel {
public:
    // Same spectrum for every ray of a window.
    ForwardModel(std::shared_ptr<const SystemMatrix> A, WindowedSpectra spectra);
    // per_ray[w][i] is the spectrum of ray i in window w.
    ForwardModel(std::shared_ptr<const SystemMatrix> A, std::vector<std::vector<Spectrum>> per_ray);

    const SystemMatrix& matrix() const noexcept { return *A_; }
    std::shared_ptr<const SystemMatrix> matrix_ptr() const noexcept { return A_; }
    std::size_t rows() const noexcept { return A_->rows(); }
    std::size_t dim() const noexcept { return A_->cols(); }
    std::size_t windows() const noexcept { return n_windows_; }
    std::size_t measurements() const noexcept { return A_->rows() * n_windows_; }
    bool per_ray() const noexcept { return per_ray_; }

    const Spectrum& spectrum(std::size_t m) const;

    // Means I * h(t) of every measurement given per-ray projections t = Ax.
    void means(std::span<const double> proj, std::span<double> out) const;
    // Means and their derivatives I * h'(t) (0 for t <= 0).
    void means_and_slopes(std::span<const double> proj, std::span<double> mean,
                          std::span<double> slope) const;

    MeasurementSet expected(std::span<const double> x) const;

    // F(x) = (1/n) sum_m (y_m - I_m h_m(<a_r(m), x>)) a_r(m)
    Vec operator_F(std::span<const double> y, std::span<const double> x) const;
    // Same, reusing caller buffers: proj (rows), mean (measurements), out (dim).
    void operator_F(std::span<const double> y, std::span<const double> x, std::span<double> proj,
                    std::span<double> mean, std::span<double> out) const;

    // sum over windows of the largest I * sum_j s_j mu_j among the window's rays.
    double slope_bound() const;
    double max_attenuation() const;

private:
    void init();

    std::shared_ptr<const SystemMatrix> A_;
    std::vector<Spectrum> spectra_;
    std::size_t n_windows_ = 0;
    bool per_ray_ = false;
    bool shared_attenuations_ = false;
};

MeasurementSet to_measurements(const ForwardModel& model, Vec counts);

} // namespace polyct
