#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "polyct/errors.hpp"
#include "polyct/model.hpp"
#include "polyct/rng.hpp"
#include "polyct/system_matrix.hpp"

using namespace polyct;

namespace {

Spectrum two_bin() {
    Spectrum s;
    s.weights = {0.5, 0.5};
    s.attenuations = {1.0, 2.0};
    s.intensity = 1.0;
    return s;
}

Spectrum random_spectrum(CounterRng& rng, std::size_t bins) {
    Spectrum s;
    s.weights.resize(bins);
    s.attenuations.resize(bins);
    double total = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
        s.weights[j] = 0.05 + rng.uniform();
        s.attenuations[j] = 0.1 + 3.0 * rng.uniform();
        total += s.weights[j];
    }
    for (double& w : s.weights) {
        w /= total;
    }
    s.intensity = 1.0 + 100.0 * rng.uniform();
    return s;
}

} // namespace

TEST_CASE("response at zero and negative arguments is one") {
    CounterRng rng(1);
    for (int k = 0; k < 20; ++k) {
        const Spectrum s = random_spectrum(rng, 1 + k % 7);
        CHECK(s.response(0.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(s.response(-5.0) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("response scalar values") {
    CHECK(monochromatic_spectrum(1.0, 1.0).response(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    const double expect = 0.5 * std::exp(-1.0) + 0.5 * std::exp(-2.0);
    CHECK(two_bin().response(1.0) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("response is nonincreasing and in (0, 1]") {
    CounterRng rng(2);
    for (int k = 0; k < 200; ++k) {
        const Spectrum s = random_spectrum(rng, 1 + k % 9);
        double a = 4.0 * rng.normal();
        double b = 4.0 * rng.normal();
        if (a > b) {
            std::swap(a, b);
        }
        CHECK(s.response(a) >= s.response(b));
        CHECK(s.response(b) > 0.0);
        // Weights sum to one only within 1e-12.
        CHECK(s.response(a) <= 1.0 + 1e-12);
    }
}

TEST_CASE("derivative magnitude") {
    CHECK(monochromatic_spectrum(1.0, 1.0).derivative_magnitude(1.0) == doctest::Approx(std::exp(-1.0)));
    const double expect = 0.5 * std::exp(-0.5) + 1.0 * std::exp(-1.0);
    CHECK(two_bin().derivative_magnitude(0.5) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(two_bin().derivative_magnitude(2.0) < two_bin().derivative_magnitude(1.0));
    CHECK_THROWS_AS(two_bin().derivative_magnitude(0.0), std::invalid_argument);
    CHECK_THROWS_AS(two_bin().derivative_magnitude(-1.0), std::invalid_argument);
}

TEST_CASE("derivative matches finite differences of the response") {
    CounterRng rng(3);
    for (int k = 0; k < 50; ++k) {
        const Spectrum s = random_spectrum(rng, 3);
        const double t = 0.2 + 2.0 * rng.uniform();
        const double h = 1e-6;
        const double fd = (s.response(t + h) - s.response(t - h)) / (2.0 * h);
        CHECK(-fd == doctest::Approx(s.derivative_magnitude(t)).epsilon(1e-7));
    }
}

TEST_CASE("spectrum validation names the field") {
    Spectrum s = two_bin();
    s.weights = {0.5, 0.6};
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("sum"), std::invalid_argument);
    s = two_bin();
    s.attenuations[1] = -1.0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("attenuations[1]"), std::invalid_argument);
    s = two_bin();
    s.intensity = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    WindowedSpectra w;
    w.windows = {two_bin(), s};
    CHECK_THROWS_WITH_AS(w.validate(), doctest::Contains("windows[1]"), std::invalid_argument);
}

TEST_CASE("expected counts") {
    const auto A = SystemMatrix::from_rows(2, {{{0, std::log(2.0)}}});
    WindowedSpectra sp;
    sp.windows = {monochromatic_spectrum(1.0, 1000.0)};
    const Vec x{1.0, 0.0};
    const MeasurementSet m = expected_counts(A, x, sp);
    REQUIRE(m.size() == 1);
    CHECK(m.counts[0] == doctest::Approx(500.0).epsilon(1e-14));

    const Vec zero(2, 0.0);
    sp.windows = {monochromatic_spectrum(1.0, 1000.0), default_spectrum(77.0)};
    const MeasurementSet z = expected_counts(A, zero, sp);
    REQUIRE(z.window_count() == 2);
    CHECK(z.counts[0] == doctest::Approx(1000.0));
    CHECK(z.counts[1] == doctest::Approx(77.0));

    // 2x2 image, one ray with hand-picked weights.
    const auto B = SystemMatrix::from_rows(4, {{{0, 0.3}, {1, 0.7}, {3, 0.2}}});
    const Vec img{0.4, 1.1, 9.0, 0.5};
    const Spectrum s = two_bin();
    WindowedSpectra one;
    one.windows = {s};
    const double t = 0.3 * 0.4 + 0.7 * 1.1 + 0.2 * 0.5;
    const double hand = 0.5 * std::exp(-t) + 0.5 * std::exp(-2.0 * t);
    CHECK(expected_counts(B, img, one).counts[0] == doctest::Approx(hand).epsilon(1e-15));
    CHECK_THROWS_AS(expected_counts(B, Vec(3, 0.0), one), DimensionError);
}

TEST_CASE("poisson sampling") {
    MeasurementSet m;
    m.counts = Vec(10000, 1e6);
    m.window_offsets = {0, 10000};
    const MeasurementSet a = sample_poisson(m, 11);
    const MeasurementSet b = sample_poisson(m, 11);
    CHECK(a.counts == b.counts);
    const double mean = std::accumulate(a.counts.begin(), a.counts.end(), 0.0) / 1e4;
    CHECK(std::abs(mean - 1e6) <= 4.0 * std::sqrt(1e6 / 1e4));
    double var = 0.0;
    for (double c : a.counts) {
        var += (c - mean) * (c - mean);
    }
    var /= 9999.0;
    CHECK(var == doctest::Approx(1e6).epsilon(0.05));

    MeasurementSet zero;
    zero.counts = Vec(100, 0.0);
    zero.window_offsets = {0, 100};
    for (double c : sample_poisson(zero, 3).counts) {
        CHECK(c == 0.0);
    }
    zero.counts[5] = -1.0;
    CHECK_THROWS_AS(sample_poisson(zero, 3), std::invalid_argument);
}

TEST_CASE("poisson small means match mean and variance") {
    for (double lam : {0.5, 4.0, 29.0, 31.0, 250.0}) {
        MeasurementSet m;
        m.counts = Vec(100000, lam);
        m.window_offsets = {0, 100000};
        const Vec c = sample_poisson(m, 5).counts;
        const double mean = std::accumulate(c.begin(), c.end(), 0.0) / 1e5;
        double var = 0.0;
        for (double v : c) {
            var += (v - mean) * (v - mean);
        }
        var /= 99999.0;
        CHECK(std::abs(mean - lam) <= 5.0 * std::sqrt(lam / 1e5));
        CHECK(var == doctest::Approx(lam).epsilon(0.03));
    }
}

TEST_CASE("gaussian electronic noise") {
    MeasurementSet m;
    m.counts = Vec(100000, 3.0);
    m.window_offsets = {0, 100000};
    CHECK(add_gaussian_noise(m, 0.0, 1).counts == m.counts);
    const MeasurementSet a = add_gaussian_noise(m, 2.0, 9);
    CHECK(a.counts == add_gaussian_noise(m, 2.0, 9).counts);
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean += a.counts[i] - 3.0;
    }
    mean /= 1e5;
    double var = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.counts[i] - 3.0 - mean;
        var += d * d;
    }
    var /= 99999.0;
    CHECK(var == doctest::Approx(4.0).epsilon(0.05));
    CHECK_THROWS_AS(add_gaussian_noise(m, -1.0, 1), std::invalid_argument);
}

TEST_CASE("known-material reparameterization") {
    const Spectrum s = default_spectrum(1e4, 7);
    const Vec zeros(7, 0.0);
    const Spectrum same = reparameterize_known_materials(s, zeros);
    CHECK(same.weights == s.weights);
    CHECK(same.attenuations == s.attenuations);
    CHECK(same.intensity == s.intensity);

    Spectrum t = two_bin();
    t.intensity = 100.0;
    const Vec e{0.0, 50.0};
    const Spectrum r = reparameterize_known_materials(t, e);
    CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.weights[1] < 1e-20);
    CHECK(r.intensity == doctest::Approx(50.0).epsilon(1e-12));

    const Vec neg{0.0, -1.0};
    CHECK_THROWS_AS(reparameterize_known_materials(t, neg), std::invalid_argument);
}

TEST_CASE("reparameterized counts equal the two-material model") {
    CounterRng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t bins = 2 + trial % 6;
        const Spectrum s = random_spectrum(rng, bins);
        Vec mu_known(bins);
        for (double& m : mu_known) {
            m = 0.1 + 2.0 * rng.uniform();
        }
        const double known_proj = 3.0 * rng.uniform();
        const double unknown_proj = 2.0 * rng.uniform();
        Vec e(bins);
        for (std::size_t j = 0; j < bins; ++j) {
            e[j] = mu_known[j] * known_proj;
        }
        // Direct evaluation: I * sum_j s_j exp(-mu_known_j p_known - mu_j p_unknown).
        double direct = 0.0;
        for (std::size_t j = 0; j < bins; ++j) {
            direct += s.weights[j] * std::exp(-e[j] - s.attenuations[j] * unknown_proj);
        }
        direct *= s.intensity;
        const Spectrum r = reparameterize_known_materials(s, e);
        r.validate();
        CHECK(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.intensity * r.response(unknown_proj) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("default spectrum and windows are valid") {
    const Spectrum s = default_spectrum(1e6);
    s.validate();
    CHECK(s.bins() == 50);
    const Vec mu = default_attenuations(50);
    CHECK(*std::min_element(mu.begin(), mu.end()) == doctest::Approx(0.2));
    CHECK(*std::max_element(mu.begin(), mu.end()) == doctest::Approx(5.0));
    const Vec dens = default_source_density(50);
    const auto peak = std::max_element(dens.begin(), dens.end()) - dens.begin();
    CHECK(std::abs(static_cast<double>(peak) - 50.0 / 3.0) <= 1.0);
    const WindowedSpectra w = default_windows(1e6, 50, 3);
    w.validate();
    CHECK(w.size() == 3);
    double total = 0.0;
    for (const Spectrum& x : w.windows) {
        total += x.intensity;
    }
    // Overlapping windows may count a photon twice but each window sees a share.
    for (const Spectrum& x : w.windows) {
        CHECK(x.intensity > 0.0);
        CHECK(x.intensity < 1e6);
    }
    CHECK(total > 0.5e6);
}
