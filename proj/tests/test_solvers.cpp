#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "polyct/errors.hpp"
#include "polyct/experiments.hpp"
#include "polyct/forward.hpp"
#include "polyct/geometry.hpp"
#include "polyct/rng.hpp"
#include "polyct/solvers.hpp"
#include "polyct/theory.hpp"

using namespace polyct;

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double e : v) {
        s += e * e;
    }
    return std::sqrt(s);
}

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

WindowedSpectra single(const Spectrum& s) {
    WindowedSpectra w;
    w.windows = {s};
    return w;
}

Spectrum two_bin(double intensity) {
    Spectrum s;
    s.weights = {0.4, 0.6};
    s.attenuations = {0.7, 1.9};
    s.intensity = intensity;
    return s;
}

// Small CT problem: 10 views of a 12^2 phantom with three windows.
struct SmallCt {
    std::shared_ptr<const SystemMatrix> A;
    std::shared_ptr<ForwardModel> model;
    Vec truth;
};

SmallCt small_ct(double intensity = 1e4) {
    SmallCt p;
    p.A = std::make_shared<const SystemMatrix>(build_radon_matrix(default_geometry(10, 12)));
    p.model = std::make_shared<ForwardModel>(p.A, default_windows(intensity, 20, 3));
    p.truth = make_pmma_phantom(12).values;
    return p;
}

} // namespace

TEST_CASE("operator vanishes at the truth on noiseless data") {
    const SmallCt p = small_ct();
    const MeasurementSet y = p.model->expected(p.truth);
    const Vec F = p.model->operator_F(y.counts, p.truth);
    // Scale: magnitude of a single term of the sum.
    double scale = 0.0;
    for (std::size_t m = 0; m < y.size(); ++m) {
        scale += y.counts[m] * std::sqrt(p.A->row_norm_squared(m % p.A->rows()));
    }
    scale /= static_cast<double>(y.size());
    CHECK(norm(F) <= 1e-10 * scale);
}

TEST_CASE("operator on a single ray matches the scalar formula") {
    const auto A = std::make_shared<const SystemMatrix>(SystemMatrix::from_rows(1, {{{0, 0.8}}}));
    const Spectrum s = two_bin(50.0);
    const ForwardModel model(A, single(s));
    const Vec x{1.3};
    const Vec y{12.0};
    const double t = 0.8 * 1.3;
    const double h = 0.4 * std::exp(-0.7 * t) + 0.6 * std::exp(-1.9 * t);
    const double expect = (12.0 - 50.0 * h) * 0.8;
    CHECK(model.operator_F(y, x)[0] == doctest::Approx(expect).epsilon(1e-14));

    MeasurementSet ms;
    ms.counts = y;
    ms.window_offsets = {0, 1};
    CHECK(operator_F(*A, single(s), ms, x)[0] == doctest::Approx(expect).epsilon(1e-14));
    CHECK_THROWS_AS(model.operator_F(Vec{1.0, 2.0}, x), DimensionError);
}

TEST_CASE("operator is monotone and Lipschitz with the theory bound") {
    const SmallCt p = small_ct();
    const MeasurementSet y = sample_poisson(p.model->expected(p.truth), 3);
    const double L = lipschitz_bound(*p.model);
    CounterRng rng(10);
    for (int k = 0; k < 200; ++k) {
        Vec a(p.truth.size());
        Vec b(p.truth.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = 2.0 * rng.uniform();
            b[i] = 2.0 * rng.normal();
        }
        const Vec Fa = p.model->operator_F(y.counts, a);
        const Vec Fb = p.model->operator_F(y.counts, b);
        double inner = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            inner += (Fa[i] - Fb[i]) * (a[i] - b[i]);
        }
        const double d = dist(a, b);
        CHECK(inner >= -1e-10 * d * d);
        CHECK(dist(Fa, Fb) <= L * d * (1.0 + 1e-12));
    }
}

TEST_CASE("averaged iterate window") {
    const std::vector<Vec> c(5, Vec{2.0, -1.0});
    CHECK(averaged_iterate(c) == Vec{2.0, -1.0});
    const std::vector<Vec> two{{1.0}, {3.0}};
    CHECK(averaged_iterate(two)[0] == doctest::Approx(2.0));
    const std::vector<Vec> four{{1.0}, {2.0}, {3.0}, {7.0}};
    CHECK(averaged_iterate(four)[0] == doctest::Approx(4.0));
    const std::vector<Vec> five{{1.0}, {2.0}, {3.0}, {4.0}, {11.0}};
    CHECK(averaged_iterate(five)[0] == doctest::Approx(6.0));
    CHECK_THROWS_AS(averaged_iterate(std::vector<Vec>{}), std::invalid_argument);
}

TEST_CASE("step size rules") {
    // Sigma = A^T A / n = I for A = sqrt(n) I.
    const std::size_t n = 6;
    Vec dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        dense[i * n + i] = std::sqrt(static_cast<double>(n));
    }
    const auto A = std::make_shared<const SystemMatrix>(SystemMatrix::dense(n, n, dense));
    const ForwardModel model(A, single(monochromatic_spectrum(1.0, 1.0)));
    CHECK(step_size_rule(StepRule::positive_meas, model) == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(step_size_rule(StepRule::gaussian, model) == doctest::Approx(0.05).epsilon(1e-12));
    const SmallCt p = small_ct();
    CHECK(step_size_rule(StepRule::general, *p.model) == doctest::Approx(1.0 / (4.0 * lipschitz_bound(*p.model))));
    CHECK_THROWS_AS(step_size_rule(StepRule::fixed, model), std::invalid_argument);
    CHECK(parse_step_rule("gaussian") == StepRule::gaussian);
    CHECK_THROWS_AS(parse_step_rule("bogus"), ConfigError);
}

TEST_CASE("solver config validation") {
    SolverConfig c;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.step_size = 0.1;
    c.validate();
    c.max_iters = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.max_iters = 5;
    c.convergence_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("EXACT started at the truth stays there") {
    const SmallCt p = small_ct();
    const MeasurementSet y = p.model->expected(p.truth);
    const ConstraintSet X = ConstraintSet::intersection(ConstraintSet::tv_ball(tv_norm(p.truth), 12),
                                                        ConstraintSet::nonneg());
    SolverConfig cfg;
    cfg.rule = StepRule::general;
    cfg.max_iters = 20;
    const SolveResult r = exact_solve(*p.model, y.counts, X, cfg, p.truth, &p.truth);
    CHECK(dist(r.x, p.truth) <= 1e-12);
    for (const TraceRecord& rec : r.trace.records) {
        CHECK(rec.avg_movement <= 1e-12);
    }
}

TEST_CASE("EXACT on the noiseless Gaussian problem reaches 1e-8 linearly") {
    const GaussianProblem g = make_gaussian_problem(8000, 100, 3.0, 0);
    SolverConfig cfg;
    cfg.step_size = 0.25;
    cfg.max_iters = 10000;
    cfg.truth_tol = 1e-8;
    const Vec x1(100, 0.0);
    const SolveResult r = exact_solve(*g.model, g.y.counts, g.X, cfg, x1, &g.x_star);
    CHECK(r.trace.converged);
    CHECK(r.trace.records.back().dist_to_truth <= 1e-8);
    // Error over a span of 1000 iterations shrinks by a steady factor.
    const auto& rec = r.trace.records;
    REQUIRE(rec.size() > 3000);
    const double r1 = rec[2000].dist_to_truth / rec[1000].dist_to_truth;
    const double r2 = rec[3000].dist_to_truth / rec[2000].dist_to_truth;
    CHECK(r1 < 0.05);
    CHECK(r2 < 0.05);
}

TEST_CASE("without averaging the noiseless error eventually decreases") {
    const GaussianProblem g = make_gaussian_problem(2000, 50, 3.0, 1);
    SolverConfig cfg;
    cfg.step_size = 0.25;
    cfg.max_iters = 300;
    cfg.averaging = false;
    const Vec x1(50, 0.0);
    const SolveResult r = exact_solve(*g.model, g.y.counts, g.X, cfg, x1, &g.x_star);
    for (std::size_t k = 11; k < r.trace.records.size(); ++k) {
        CHECK(r.trace.records[k].dist_to_truth <= r.trace.records[k - 1].dist_to_truth);
    }
}

TEST_CASE("divergence guard") {
    const GaussianProblem g = make_gaussian_problem(200, 20, 3.0, 2);
    SolverConfig cfg;
    cfg.step_size = 1e9;
    cfg.max_iters = 100;
    const Vec x1(20, 0.1);
    CHECK_THROWS_AS(mse_gd_solve(*g.model, g.y.counts, ConstraintSet::nonneg(), cfg, x1), DivergenceError);
}

TEST_CASE("L2 gradient and L1 subgradient match finite differences") {
    const SmallCt p = small_ct(1e3);
    const MeasurementSet y = sample_poisson(p.model->expected(p.truth), 5);
    CounterRng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        Vec x(p.truth.size());
        for (double& v : x) {
            v = 0.2 + rng.uniform();
        }
        const Vec g2 = l2_gradient(*p.model, y.counts, x);
        const Vec g1 = l1_subgradient(*p.model, y.counts, x);
        for (int k = 0; k < 5; ++k) {
            const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(x.size()));
            Vec xp = x;
            Vec xm = x;
            xp[j] += 1e-5;
            xm[j] -= 1e-5;
            const double fd2 = (l2_loss(*p.model, y.counts, xp) - l2_loss(*p.model, y.counts, xm)) / 2e-5;
            const double fd1 = (l1_loss(*p.model, y.counts, xp) - l1_loss(*p.model, y.counts, xm)) / 2e-5;
            CHECK(g2[j] == doctest::Approx(fd2).epsilon(1e-4).scale(1e-8));
            CHECK(g1[j] == doctest::Approx(fd1).epsilon(1e-4).scale(1e-8));
        }
    }
}

TEST_CASE("MSE GD at the truth and loss descent") {
    const SmallCt p = small_ct(1e3);
    const MeasurementSet y = p.model->expected(p.truth);
    SolverConfig cfg;
    cfg.step_size = 1e-7;
    cfg.max_iters = 10;
    const SolveResult r = mse_gd_solve(*p.model, y.counts, ConstraintSet::nonneg(), cfg, p.truth, &p.truth);
    CHECK(r.trace.records.front().loss == doctest::Approx(0.0).scale(1.0));
    CHECK(dist(r.x, p.truth) <= 1e-12);

    const MeasurementSet noisy = sample_poisson(p.model->expected(p.truth), 7);
    cfg.max_iters = 200;
    const Vec x1(p.truth.size(), 0.3);
    const SolveResult d = mse_gd_solve(*p.model, noisy.counts, ConstraintSet::nonneg(), cfg, x1, &p.truth);
    for (std::size_t k = 1; k < d.trace.records.size(); ++k) {
        CHECK(d.trace.records[k].loss <= d.trace.records[k - 1].loss);
    }
}

TEST_CASE("Polyak step and solver") {
    CHECK(polyak_step(3.0, 3.0, 1.0, 0.5, 4) == 0.0);
    CHECK(polyak_step(5.0, 3.0, 4.0, 0.5, 4) == doctest::Approx(0.5));
    CHECK(polyak_step(2.0, 3.0, 4.0, 0.5, 4) == doctest::Approx(0.125));
    CHECK_THROWS_AS(polyak_step(5.0, 3.0, 0.0, 0.5, 4), ConvergenceError);

    const SmallCt p = small_ct(1e3);
    const MeasurementSet y = p.model->expected(p.truth);
    SolverConfig cfg;
    cfg.max_iters = 10;
    const SolveResult r = polyak_sgm_solve(*p.model, y.counts, ConstraintSet::nonneg(), cfg, p.truth, 0.0, &p.truth);
    CHECK(dist(r.x, p.truth) <= 1e-12);
}

TEST_CASE("ADMM z-update stationary point and grid oracle") {
    const Spectrum s = default_spectrum(1e3, 20);
    const Spectrum s2 = two_bin(400.0);
    const std::vector<const Spectrum*> sp{&s, &s2};
    const double v = 1.7;
    const Vec y{s.intensity * s.response(v), s2.intensity * s2.response(v)};
    CHECK(admm_z_update(sp, y, v, 3.0) == doctest::Approx(v).epsilon(1e-10));

    CounterRng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec yy{std::floor(1e3 * rng.uniform()), std::floor(400.0 * rng.uniform())};
        const double anchor = 3.0 * rng.normal();
        const double rho = std::pow(10.0, 2.0 * rng.uniform());
        const double z = admm_z_update(sp, yy, anchor, rho);
        // 10^4-point scan on a window that contains the minimizer.
        const double lo = std::min(anchor, z) - 2.0;
        const double hi = std::max(anchor, z) + 2.0;
        double best = 1e300;
        double arg = lo;
        for (int k = 0; k <= 10000; ++k) {
            const double t = lo + (hi - lo) * k / 10000.0;
            const double f = admm_z_objective(sp, yy, anchor, rho, t);
            if (f < best) {
                best = f;
                arg = t;
            }
        }
        // Grid localization error is one spacing.
        CHECK(std::abs(z - arg) <= 2.0 * (hi - lo) / 10000.0);
        CHECK(admm_z_objective(sp, yy, anchor, rho, z) <= best + 1e-9 * std::abs(best));
    }
}

TEST_CASE("ADMM primal residual shrinks on a noiseless problem") {
    auto A = std::make_shared<const SystemMatrix>(build_radon_matrix(default_geometry(10, 25)));
    const ForwardModel model(A, default_windows(1e6, 50, 3));
    const Vec truth = make_pmma_phantom(25).values;
    const MeasurementSet y = model.expected(truth);
    SolverConfig cfg;
    cfg.admm_rho = 1e4;
    cfg.max_iters = 400;
    cfg.convergence_tol = 1e-9;
    const Vec x1(truth.size(), 0.1);
    const SolveResult r = admm_poisson_solve(model, y.counts, ConstraintSet::nonneg(), cfg, x1, &truth);
    REQUIRE_FALSE(r.trace.primal_residuals.empty());
    CHECK(r.trace.primal_residuals.back() < 1e-3);
    CHECK(r.trace.primal_residuals.back() < r.trace.primal_residuals.front());
}
