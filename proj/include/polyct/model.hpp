#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "polyct/system_matrix.hpp"

namespace polyct {

// One detector window: normalized sensitivities s_j, attenuation
// coefficients mu_j and mean source intensity.
struct Spectrum {
    Vec weights;
    Vec attenuations;
    double intensity = 1.0;

    // Throws std::invalid_argument naming the offending field and index.
    void validate() const;
    std::size_t bins() const noexcept { return weights.size(); }

    // h(t) = sum_j s_j exp(-mu_j max(t, 0))
    double response(double t) const;
    // |h'(t)| = sum_j s_j mu_j exp(-mu_j t), t > 0 only.
    double derivative_magnitude(double t) const;
    // Almost-everywhere derivative h'(t); 0 for t <= 0.
    double response_derivative(double t) const;
    // sum_j s_j mu_j
    double slope_sum() const;
    double max_attenuation() const;
};

double attenuation_response(const Spectrum& spectrum, double t);
double attenuation_derivative_magnitude(const Spectrum& spectrum, double t);

struct WindowedSpectra {
    std::vector<Spectrum> windows;

    void validate() const;
    std::size_t size() const noexcept { return windows.size(); }
};

// Counts of all windows stacked into one list: window w occupies
// [window_offsets[w], window_offsets[w + 1]).
struct MeasurementSet {
    Vec counts;
    std::vector<std::size_t> window_offsets;

    std::size_t size() const noexcept { return counts.size(); }
    std::size_t window_count() const noexcept {
        return window_offsets.empty() ? 0 : window_offsets.size() - 1;
    }
    std::span<const double> window(std::size_t w) const;
};

MeasurementSet expected_counts(const SystemMatrix& A, std::span<const double> x,
                               const WindowedSpectra& spectra);
MeasurementSet sample_poisson(const MeasurementSet& means, std::uint64_t seed);
MeasurementSet add_gaussian_noise(const MeasurementSet& y, double sigma, std::uint64_t seed);

// Folds known materials into the spectrum of one ray. exponents[j] is the
// known line integral at wavelength j, sum_m mu_{m,j} <a_i^m, x^m>.
Spectrum reparameterize_known_materials(const Spectrum& spectrum, std::span<const double> exponents);

// Log-spaced attenuations in [0.2, 5.0] (descending with bin index, i.e.
// ascending photon energy).
Vec default_attenuations(std::size_t bins = 50);
// Source density: discretized bell peaked at bin W/3, normalized.
Vec default_source_density(std::size_t bins = 50);
Spectrum default_spectrum(double intensity, std::size_t bins = 50);
// Three overlapping detector windows over the default source.
WindowedSpectra default_windows(double intensity, std::size_t bins = 50, std::size_t n_windows = 3);
Spectrum monochromatic_spectrum(double attenuation, double intensity);

} // namespace polyct
