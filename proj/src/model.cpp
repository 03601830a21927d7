#include "polyct/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "polyct/errors.hpp"
#include "polyct/rng.hpp"

namespace polyct {

namespace {

std::string indexed(const char* field, std::size_t i) {
    return std::string(field) + "[" + std::to_string(i) + "]";
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace

void Spectrum::validate() const {
    if (weights.empty()) {
        throw std::invalid_argument("spectrum: weights must be nonempty");
    }
    if (weights.size() != attenuations.size()) {
        throw std::invalid_argument("spectrum: weights and attenuations differ in length (" +
                                    std::to_string(weights.size()) + " vs " +
                                    std::to_string(attenuations.size()) + ")");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        const double s = weights[j];
        if (!(s > 0.0 && s <= 1.0)) {
            throw std::invalid_argument("spectrum: " + indexed("weights", j) + " = " +
                                        std::to_string(s) + " is outside (0, 1]");
        }
        if (!(attenuations[j] > 0.0) || !std::isfinite(attenuations[j])) {
            throw std::invalid_argument("spectrum: " + indexed("attenuations", j) +
                                        " must be positive and finite");
        }
        total += s;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("spectrum: weights sum to " + std::to_string(total) +
                                    ", expected 1");
    }
    if (!(intensity > 0.0) || !std::isfinite(intensity)) {
        throw std::invalid_argument("spectrum: intensity must be positive and finite");
    }
}

double Spectrum::response(double t) const {
    const double tp = t > 0.0 ? t : 0.0;
    double h = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        h += weights[j] * std::exp(-attenuations[j] * tp);
    }
    return h;
}

double Spectrum::derivative_magnitude(double t) const {
    if (!(t > 0.0)) {
        throw std::invalid_argument("derivative_magnitude: argument must be positive");
    }
    double g = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        g += weights[j] * attenuations[j] * std::exp(-attenuations[j] * t);
    }
    return g;
}

double Spectrum::response_derivative(double t) const {
    if (t <= 0.0) {
        return 0.0;
    }
    return -derivative_magnitude(t);
}

double Spectrum::slope_sum() const {
    double g = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        g += weights[j] * attenuations[j];
    }
    return g;
}

double Spectrum::max_attenuation() const {
    return attenuations.empty() ? 0.0 : *std::max_element(attenuations.begin(), attenuations.end());
}

double attenuation_response(const Spectrum& spectrum, double t) { return spectrum.response(t); }

double attenuation_derivative_magnitude(const Spectrum& spectrum, double t) {
    return spectrum.derivative_magnitude(t);
}

void WindowedSpectra::validate() const {
    if (windows.empty()) {
        throw std::invalid_argument("spectra: at least one window is required");
    }
    for (std::size_t w = 0; w < windows.size(); ++w) {
        try {
            windows[w].validate();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(indexed("windows", w) + ": " + e.what());
        }
    }
}

std::span<const double> MeasurementSet::window(std::size_t w) const {
    if (w + 1 >= window_offsets.size()) {
        throw std::out_of_range("measurement window index out of range");
    }
    return std::span<const double>(counts).subspan(window_offsets[w],
                                                   window_offsets[w + 1] - window_offsets[w]);
}

MeasurementSet expected_counts(const SystemMatrix& A, std::span<const double> x,
                               const WindowedSpectra& spectra) {
    if (A.cols() != x.size()) {
        throw DimensionError("expected_counts: matrix has " + std::to_string(A.cols()) +
                             " columns but image has " + std::to_string(x.size()) + " entries");
    }
    const Vec projections = A.multiply(x);
    MeasurementSet out;
    out.counts.reserve(projections.size() * spectra.size());
    out.window_offsets.push_back(0);
    for (const auto& window : spectra.windows) {
        for (double t : projections) {
            out.counts.push_back(window.intensity * window.response(t));
        }
        out.window_offsets.push_back(out.counts.size());
    }
    return out;
}

MeasurementSet sample_poisson(const MeasurementSet& means, std::uint64_t seed) {
    CounterRng rng(seed, 0x706f6973ULL);
    MeasurementSet out = means;
    for (std::size_t i = 0; i < means.counts.size(); ++i) {
        const double m = means.counts[i];
        if (!(m >= 0.0)) {
            throw std::invalid_argument("sample_poisson: " + indexed("means", i) + " is negative");
        }
        out.counts[i] = static_cast<double>(rng.poisson(m));
    }
    return out;
}

MeasurementSet add_gaussian_noise(const MeasurementSet& y, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("add_gaussian_noise: sigma must be nonnegative");
    }
    MeasurementSet out = y;
    if (sigma == 0.0) {
        return out;
    }
    CounterRng rng(seed, 0x6761757373ULL);
    for (double& v : out.counts) {
        v += sigma * rng.normal();
    }
    return out;
}

Spectrum reparameterize_known_materials(const Spectrum& spectrum, std::span<const double> exponents) {
    if (exponents.size() != spectrum.bins()) {
        throw DimensionError("reparameterize_known_materials: expected " +
                             std::to_string(spectrum.bins()) + " exponents, got " +
                             std::to_string(exponents.size()));
    }
    bool all_zero = true;
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        if (!(exponents[j] >= 0.0)) {
            throw std::invalid_argument("reparameterize_known_materials: " + indexed("exponents", j) +
                                        " is negative");
        }
        all_zero = all_zero && exponents[j] == 0.0;
    }
    if (all_zero) {
        return spectrum;
    }
    // Log-domain normalization; weights that underflow are floored at the
    // smallest normal double so the result stays a valid spectrum.
    Vec logw(exponents.size());
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        logw[j] = std::log(spectrum.weights[j]) - exponents[j];
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double& v : logw) {
        v = std::exp(v - top);
        total += v;
    }
    Spectrum out;
    out.attenuations = spectrum.attenuations;
    out.weights.resize(logw.size());
    for (std::size_t j = 0; j < logw.size(); ++j) {
        out.weights[j] = std::max(logw[j] / total, std::numeric_limits<double>::min());
    }
    out.intensity = std::max(spectrum.intensity * std::exp(top) * total, std::numeric_limits<double>::min());
    return out;
}

Vec default_attenuations(std::size_t bins) {
    Vec mu(bins);
    for (std::size_t j = 0; j < bins; ++j) {
        const double frac = bins == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(bins - 1);
        mu[j] = 5.0 * std::pow(0.2 / 5.0, frac);
    }
    return mu;
}

Vec default_source_density(std::size_t bins) {
    Vec src(bins);
    const double peak = static_cast<double>(bins) / 3.0;
    const double width = std::max(static_cast<double>(bins) / 6.0, 0.5);
    for (std::size_t j = 0; j < bins; ++j) {
        const double u = (static_cast<double>(j) - peak) / width;
        src[j] = std::exp(-0.5 * u * u);
    }
    const double total = std::accumulate(src.begin(), src.end(), 0.0);
    for (double& v : src) {
        v /= total;
    }
    return src;
}

Spectrum default_spectrum(double intensity, std::size_t bins) {
    Spectrum s;
    s.weights = default_source_density(bins);
    s.attenuations = default_attenuations(bins);
    s.intensity = intensity;
    return s;
}

WindowedSpectra default_windows(double intensity, std::size_t bins, std::size_t n_windows) {
    const Vec src = default_source_density(bins);
    const Vec mu = default_attenuations(bins);
    const double band = static_cast<double>(bins) / static_cast<double>(n_windows);
    const double overlap = 0.25 * band;
    const double edge = std::max(0.04 * static_cast<double>(bins), 0.5);
    WindowedSpectra spectra;
    for (std::size_t w = 0; w < n_windows; ++w) {
        const double lo = static_cast<double>(w) * band - overlap;
        const double hi = static_cast<double>(w + 1) * band + overlap;
        Vec s(bins);
        double total = 0.0;
        for (std::size_t j = 0; j < bins; ++j) {
            const double pos = static_cast<double>(j) + 0.5;
            const double sens = logistic((pos - lo) / edge) * logistic((hi - pos) / edge);
            s[j] = src[j] * sens;
            total += s[j];
        }
        for (double& v : s) {
            v /= total;
        }
        spectra.windows.push_back(Spectrum{std::move(s), mu, intensity * total});
    }
    return spectra;
}

Spectrum monochromatic_spectrum(double attenuation, double intensity) {
    return Spectrum{{1.0}, {attenuation}, intensity};
}

} // namespace polyct
