// One PASS/FAIL line per acceptance criterion. Pass --criterion N to run a
// single criterion; the exit code is nonzero when any selected one fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"

#include "polyct/constraints.hpp"
#include "polyct/errors.hpp"
#include "polyct/experiments.hpp"
#include "polyct/forward.hpp"
#include "polyct/geometry.hpp"
#include "polyct/io.hpp"
#include "polyct/rng.hpp"
#include "polyct/solvers.hpp"
#include "polyct/theory.hpp"

#ifndef POLYCT_CONFIG_DIR
#error "POLYCT_CONFIG_DIR must name the configs directory"
#endif

using namespace polyct;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

fs::path scratch(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("polyct_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig load_config(const std::string& name) {
    const fs::path path = fs::path(POLYCT_CONFIG_DIR) / name;
    return experiment_config_from_json(read_json_file(path), path.parent_path());
}

// Seed-averaged RMSE per (value, solver) over ok cells.
std::map<std::pair<double, std::string>, double> mean_rmse(const SweepReport& r) {
    std::map<std::pair<double, std::string>, std::pair<double, int>> acc;
    for (const CellResult& c : r.cells) {
        if (c.status == "ok") {
            auto& a = acc[{c.value, c.solver}];
            a.first += c.rmse;
            a.second += 1;
        }
    }
    std::map<std::pair<double, std::string>, double> out;
    for (const auto& [k, v] : acc) {
        out[k] = v.first / v.second;
    }
    return out;
}

// ---------------------------------------------------------------- 1

Outcome monotonicity() {
    struct Case {
        std::string name;
        std::shared_ptr<const ForwardModel> model;
        Vec y;
        std::function<Vec(CounterRng&)> draw;
    };
    std::vector<Case> cases;
    auto radon = std::make_shared<const SystemMatrix>(build_radon_matrix(default_geometry(50, 25)));
    const Vec phantom = make_pmma_phantom(25).values;
    auto ct_draw = [](CounterRng& rng) {
        Vec x(625);
        for (double& v : x) {
            v = 2.0 * rng.uniform() - 0.2;
        }
        return x;
    };
    {
        WindowedSpectra one;
        one.windows = {default_spectrum(1e6)};
        auto m = std::make_shared<const ForwardModel>(radon, one);
        cases.push_back({"radon", m, sample_poisson(m->expected(phantom), 0).counts, ct_draw});
    }
    {
        const GaussianProblem g = make_gaussian_problem(8000, 100, 3.0, 0);
        const Vec xs = g.x_star;
        cases.push_back({"gaussian", g.model, g.y.counts, [xs](CounterRng& rng) {
                             Vec x = xs;
                             for (double& v : x) {
                                 v += 3.0 * rng.normal();
                             }
                             return x;
                         }});
    }
    {
        auto m = std::make_shared<const ForwardModel>(radon, default_windows(1e6, 50, 3));
        cases.push_back({"stacked", m, sample_poisson(m->expected(phantom), 1).counts, ct_draw});
    }
    std::string detail;
    bool pass = true;
    for (const Case& c : cases) {
        CounterRng rng(7);
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 1000; ++k) {
            const Vec a = c.draw(rng);
            const Vec b = c.draw(rng);
            const Vec Fa = c.model->operator_F(c.y, a);
            const Vec Fb = c.model->operator_F(c.y, b);
            double inner = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                inner += (Fa[i] - Fb[i]) * (a[i] - b[i]);
            }
            const double d = dist(a, b);
            worst = std::min(worst, inner / (d * d));
        }
        pass = pass && worst >= -1e-10;
        detail += c.name + " min ratio " + fmt("%.3g", worst) + "; ";
    }
    return {pass, detail};
}

// ---------------------------------------------------------------- 2

Outcome gaussian_convergence() {
    const fs::path out = scratch("gauss");
    const ExperimentConfig cfg = load_config("gaussian_samples_sweep.json");
    const SweepReport r = run_experiment(cfg, out);
    fs::remove_all(out);
    bool pass = !r.cells.empty();
    for (const auto& [name, ok] : r.checks) {
        pass = pass && ok;
    }
    std::map<double, std::pair<double, int>> per_n;
    for (const CellResult& c : r.cells) {
        pass = pass && c.converged;
        per_n[c.value].first += c.iterations;
        per_n[c.value].second += 1;
    }
    std::string detail = "mean iterations";
    for (const auto& [n, v] : per_n) {
        detail += " n=" + fmt("%g", n) + ":" + fmt("%.0f", v.first / v.second);
    }
    return {pass, detail};
}

// ---------------------------------------------------------------- 3

Outcome envelope() {
    const GaussianProblem g = make_gaussian_problem(8000, 100, 3.0, 0);
    const double L = lipschitz_bound(*g.model);
    const double nu = empirical_nu(*g.model, g.x_star, g.X, 2000, 0);
    const Vec x1(100, 0.0);
    const double x1_dist = dist(x1, g.x_star);
    const auto env = theorem1_envelope(nu, L, 0.0, x1_dist);
    SolverConfig cfg;
    cfg.rule = StepRule::general;
    cfg.max_iters = 100000;
    cfg.truth_tol = 1e-6;
    const SolveResult r = exact_solve(*g.model, g.y.counts, g.X, cfg, x1, &g.x_star);
    int violations = 0;
    double tightest = 0.0;
    for (const TraceRecord& rec : r.trace.records) {
        const double bound = env(rec.iter);
        if (!(rec.dist_to_truth < bound)) {
            ++violations;
        }
        tightest = std::max(tightest, rec.dist_to_truth / bound);
    }
    return {violations == 0 && r.trace.converged,
            "nu_hat " + fmt("%.4g", nu) + ", L_hat " + fmt("%.4g", L) + ", iterations " +
                std::to_string(r.trace.iterations) + ", max error/bound " + fmt("%.3g", tightest) +
                ", violations " + std::to_string(violations)};
}

// ---------------------------------------------------------------- 4 and 5

Outcome views_extremes() {
    ExperimentConfig cfg = load_config("ct_views_sweep.json");
    cfg.views = {5, 50};
    const fs::path out = scratch("views");
    const SweepReport r = run_experiment(cfg, out);
    fs::remove_all(out);
    const auto m = mean_rmse(r);
    const Vec phantom = make_pmma_phantom(cfg.problem.grid_side).values;
    const double max_density = *std::max_element(phantom.begin(), phantom.end());
    bool pass = true;
    std::string detail;
    const auto e50 = m.find({50.0, "exact"});
    if (e50 == m.end()) {
        return {false, "no EXACT result at 50 views"};
    }
    pass = e50->second <= 0.05 * max_density;
    detail = "EXACT 50-view RMSE " + fmt("%.4g", e50->second) + " (limit " + fmt("%.3g", 0.05 * max_density) + ")";
    for (const SolverSpec& s : cfg.solvers) {
        const auto lo = m.find({5.0, s.name});
        const auto hi = m.find({50.0, s.name});
        if (lo == m.end() || hi == m.end()) {
            pass = false;
            detail += "; " + s.name + " missing";
            continue;
        }
        const double ratio = lo->second / hi->second;
        pass = pass && ratio >= 5.0;
        detail += "; " + s.name + " 5/50 ratio " + fmt("%.3g", ratio);
    }
    return {pass, detail};
}

Outcome parity() {
    ExperimentConfig cfg = load_config("ct_views_sweep.json");
    cfg.views = {10};
    const fs::path out = scratch("parity");
    const SweepReport r = run_experiment(cfg, out);
    fs::remove_all(out);
    const auto m = mean_rmse(r);
    const auto e = m.find({10.0, "exact"});
    if (e == m.end()) {
        return {false, "no EXACT result at 10 views"};
    }
    double best = std::numeric_limits<double>::infinity();
    std::string best_name;
    std::string detail = "EXACT " + fmt("%.4g", e->second);
    for (const SolverSpec& s : cfg.solvers) {
        if (s.name == "exact") {
            continue;
        }
        const auto it = m.find({10.0, s.name});
        const double v = it == m.end() ? std::numeric_limits<double>::infinity() : it->second;
        detail += ", " + s.name + " " + fmt("%.4g", v);
        if (v < best) {
            best = v;
            best_name = s.name;
        }
    }
    const double ratio = e->second / best;
    return {ratio <= 1.10, detail + "; ratio to " + best_name + " " + fmt("%.4f", ratio)};
}

// ---------------------------------------------------------------- 6

// Nearest feasible point by nested 2001^2 grids. Near a curved boundary the
// grid argmin is only accurate to about sqrt(spacing), so each level zooms to
// the bounding box of all feasible points within two spacings of the best.
Vec grid_nearest(const Vec& z, const std::function<bool(double, double)>& feasible, double lo_x, double hi_x,
                 double lo_y, double hi_y) {
    constexpr int kN = 2001;
    Vec best{0.0, 0.0};
    for (int level = 0; level < 6; ++level) {
        const double hx = (hi_x - lo_x) / (kN - 1);
        const double hy = (hi_y - lo_y) / (kN - 1);
        std::vector<double> d(static_cast<std::size_t>(kN) * kN, std::numeric_limits<double>::infinity());
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < kN; ++i) {
            const double x = lo_x + i * hx;
            for (int j = 0; j < kN; ++j) {
                const double y = lo_y + j * hy;
                if (feasible(x, y)) {
                    const double v = std::hypot(x - z[0], y - z[1]);
                    d[static_cast<std::size_t>(i) * kN + j] = v;
                    if (v < best_d) {
                        best_d = v;
                        best = {x, y};
                    }
                }
            }
        }
        const double slack = 2.0 * std::hypot(hx, hy);
        double bx0 = best[0], bx1 = best[0], by0 = best[1], by1 = best[1];
        for (int i = 0; i < kN; ++i) {
            for (int j = 0; j < kN; ++j) {
                if (d[static_cast<std::size_t>(i) * kN + j] <= best_d + slack) {
                    bx0 = std::min(bx0, lo_x + i * hx);
                    bx1 = std::max(bx1, lo_x + i * hx);
                    by0 = std::min(by0, lo_y + j * hy);
                    by1 = std::max(by1, lo_y + j * hy);
                }
            }
        }
        lo_x = bx0 - 2.0 * hx;
        hi_x = bx1 + 2.0 * hx;
        lo_y = by0 - 2.0 * hy;
        hi_y = by1 + 2.0 * hy;
    }
    return best;
}

// Anisotropic TV prox by averaged subgradient descent on the strongly
// convex primal objective.
Vec prox_subgradient(const Vec& z, double lambda, long iters) {
    const std::size_t n = 4;
    Vec x = z;
    Vec avg(z.size(), 0.0);
    double weight = 0.0;
    Vec g(z.size());
    for (long t = 1; t <= iters; ++t) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            g[k] = 2.0 * (x[k] - z[k]);
        }
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t k = r * n + c;
                if (c + 1 < n) {
                    const double s = lambda * ((x[k + 1] > x[k]) - (x[k + 1] < x[k]));
                    g[k + 1] += s;
                    g[k] -= s;
                }
                if (r + 1 < n) {
                    const double s = lambda * ((x[k + n] > x[k]) - (x[k + n] < x[k]));
                    g[k + n] += s;
                    g[k] -= s;
                }
            }
        }
        // Step 1/(mu (t + 1)) with mu = 2; weights t for the average.
        const double step = 1.0 / (t + 1.0);
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] -= step * g[k];
        }
        weight += static_cast<double>(t);
        const double w = static_cast<double>(t) / weight;
        for (std::size_t k = 0; k < x.size(); ++k) {
            avg[k] += w * (x[k] - avg[k]);
        }
    }
    return avg;
}

Outcome projections() {
    struct Instance {
        std::string name;
        ProjectionFn p1;
        ProjectionFn p2;
        std::function<bool(double, double)> in1;
        std::function<bool(double, double)> in2;
        double box[4];
    };
    const Vec c0{0.0, 0.0};
    const Vec c1{1.0, 0.3};
    const Vec c2{0.9, 0.9};
    auto disc = [](const Vec& c, double r) {
        return [c, r](double x, double y) { return std::hypot(x - c[0], y - c[1]) <= r; };
    };
    // Half-space x + y <= 0.5.
    auto half = [](std::span<const double> v) {
        const double s = (v[0] + v[1] - 0.5) / 2.0;
        return s > 0.0 ? Vec{v[0] - s, v[1] - s} : Vec(v.begin(), v.end());
    };
    std::vector<Instance> inst;
    inst.push_back({"disc and quadrant", [&](std::span<const double> v) { return project_l2_ball(v, 1.0, c0); },
                    [](std::span<const double> v) { return project_nonneg(v); }, disc(c0, 1.0),
                    [](double x, double y) { return x >= 0.0 && y >= 0.0; }, {0.0, 1.0, 0.0, 1.0}});
    inst.push_back({"disc and half-space", [&](std::span<const double> v) { return project_l2_ball(v, 1.0, c0); },
                    half, disc(c0, 1.0), [](double x, double y) { return x + y <= 0.5; }, {-1.0, 1.0, -1.0, 1.0}});
    inst.push_back({"lens", [&](std::span<const double> v) { return project_l2_ball(v, 1.0, c0); },
                    [&](std::span<const double> v) { return project_l2_ball(v, 0.8, c1); }, disc(c0, 1.0),
                    disc(c1, 0.8), {0.2, 1.0, -0.5, 1.0}});
    inst.push_back({"box and disc", [](std::span<const double> v) { return project_box(v, 0.0, 1.0); },
                    [&](std::span<const double> v) { return project_l2_ball(v, 0.7, c2); },
                    [](double x, double y) { return x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0; }, disc(c2, 0.7),
                    {0.2, 1.0, 0.2, 1.0}});
    CounterRng rng(11);
    double worst_member = 0.0;
    double worst_grid = 0.0;
    for (const Instance& in : inst) {
        for (int k = 0; k < 5; ++k) {
            const Vec z{2.0 * rng.normal(), 2.0 * rng.normal()};
            const DykstraResult r = dykstra_project(z, in.p1, in.p2, 1e-9, 100000);
            worst_member = std::max({worst_member, dist(r.z, in.p1(r.z)), dist(r.z, in.p2(r.z))});
            auto feasible = [&](double x, double y) { return in.in1(x, y) && in.in2(x, y); };
            const Vec g = grid_nearest(z, feasible, in.box[0], in.box[1], in.box[2], in.box[3]);
            worst_grid = std::max(worst_grid, dist(r.z, g));
        }
    }

    // TV-ball radius accuracy.
    double worst_tv = 0.0;
    for (int k = 0; k < 10; ++k) {
        const std::size_t side = k % 2 == 0 ? 25 : 8;
        Vec z(side * side);
        for (double& v : z) {
            v = rng.normal();
        }
        const double tau = (0.05 + 0.5 * rng.uniform()) * tv_norm(z);
        worst_tv = std::max(worst_tv, std::fabs(tv_norm(project_tv_ball(z, tau)) - tau));
    }

    // prox_tv against the subgradient oracle on 4x4 images.
    double worst_prox = 0.0;
    for (int k = 0; k < 5; ++k) {
        Vec z(16);
        for (double& v : z) {
            v = rng.normal();
        }
        const double lambda = 0.2 + rng.uniform();
        ProxOptions opt;
        opt.tol = 1e-12;
        opt.max_iters = 200000;
        const Vec fast = prox_tv(z, lambda, opt);
        const Vec slow = prox_subgradient(z, lambda, 20000000);
        worst_prox = std::max(worst_prox, dist(fast, slow));
    }
    const bool pass = worst_member <= 1e-3 && worst_grid <= 1e-3 && worst_tv <= 0.01 && worst_prox <= 1e-4;
    return {pass, "member gap " + fmt("%.2g", worst_member) + ", grid gap " + fmt("%.2g", worst_grid) +
                      ", TV radius gap " + fmt("%.2g", worst_tv) + ", prox gap " + fmt("%.2g", worst_prox)};
}

// ---------------------------------------------------------------- 7

Outcome gamma_suite() {
    const Spectrum ct = default_spectrum(1.0, 50);
    const Spectrum mono = monochromatic_spectrum(1.0, 1.0);
    bool pass = true;

    const double w2 = gaussian_width_ball(2);
    const double target = 16.0 * w2 * w2 / 1e4;
    const double g = gamma_star(ct, 3.0, w2, 1e4);
    const double resid = std::fabs(psi(ct, 3.0, g) - target) / target;
    pass = pass && resid <= 1e-10;

    const double omega = gaussian_width_ball(100);
    int regime_fail = 0;
    for (const Spectrum* s : {&ct, &mono}) {
        for (double norm : {0.1, 1.0, 3.0}) {
            const double n1 = regime1_constant() * omega * omega;
            regime_fail += gamma_star(*s, norm, omega, n1) >= regime1_bound(*s, norm) ? 0 : 1;
            auto feasible = [&](double n) { return 16.0 * omega * omega / n < psi(*s, norm, 0.0); };
            auto holds2 = [&](double C) {
                const double n = C * omega * omega * regime2_factor(*s, norm);
                return feasible(n) && gamma_star(*s, norm, omega, n) >= s->slope_sum();
            };
            const double c2 = doubling_search(holds2);
            for (int k = 1; k <= 4; ++k) {
                regime_fail += holds2(c2 * std::pow(2.0, k)) ? 0 : 1;
            }
        }
    }
    pass = pass && regime_fail == 0;

    int not_decreasing = 0;
    for (const Spectrum* s : {&ct, &mono}) {
        double prev = psi(*s, 3.0, 0.0);
        for (int k = 1; k < 20; ++k) {
            const double cur = psi(*s, 3.0, 0.05 * k * k);
            not_decreasing += cur < prev ? 0 : 1;
            prev = cur;
        }
    }
    pass = pass && not_decreasing == 0;
    return {pass, "residual " + fmt("%.2g", resid) + ", regime failures " + std::to_string(regime_fail) +
                      ", psi order failures " + std::to_string(not_decreasing)};
}

// ---------------------------------------------------------------- 8

Outcome error_terms() {
    auto A = std::make_shared<const SystemMatrix>(build_radon_matrix(default_geometry(50, 25)));
    const ForwardModel model(A, default_windows(1e6, 50, 3));
    const Vec truth = make_pmma_phantom(25).values;
    const MeasurementSet clean = model.expected(truth);
    const double zero = err_term_ball(model, clean.counts, truth);
    const double expect = expected_err_squared(model, truth);
    const double bound = poisson_err_bound(model, truth, 0.05);
    double mean_sq = 0.0;
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const double e = err_term_ball(model, sample_poisson(clean, seed).counts, truth);
        mean_sq += e * e / 100.0;
        within += e <= bound ? 1 : 0;
    }
    const double rel = std::fabs(mean_sq - expect) / expect;
    const bool pass = zero <= 1e-12 && rel <= 0.10 && within >= 90;
    return {pass, "noiseless Err " + fmt("%.2g", zero) + ", mean Err^2 off by " + fmt("%.3g", rel) +
                      " relative, Err <= bound in " + std::to_string(within) + "/100"};
}

// ---------------------------------------------------------------- 9

Outcome gradients() {
    auto A = std::make_shared<const SystemMatrix>(build_radon_matrix(default_geometry(10, 25)));
    const ForwardModel model(A, default_windows(1e6, 50, 3));
    const Vec truth = make_pmma_phantom(25).values;
    const Vec y = sample_poisson(model.expected(truth), 2).counts;
    CounterRng rng(5);
    double worst2 = 0.0;
    double worst1 = 0.0;
    int points = 0;
    while (points < 50) {
        Vec x(truth.size());
        for (double& v : x) {
            v = 0.2 + rng.uniform();
        }
        Vec dir(x.size());
        for (double& v : dir) {
            v = rng.normal();
        }
        const double h = 1e-5;
        Vec xp = x;
        Vec xm = x;
        for (std::size_t k = 0; k < x.size(); ++k) {
            xp[k] += h * dir[k];
            xm[k] -= h * dir[k];
        }
        // A smooth point for the L1 loss: no residual changes sign within the stencil.
        const Vec mp = model.expected(xp).counts;
        const Vec mm = model.expected(xm).counts;
        bool smooth = true;
        for (std::size_t m = 0; m < y.size() && smooth; ++m) {
            smooth = (mp[m] - y[m]) * (mm[m] - y[m]) > 0.0;
        }
        if (!smooth) {
            continue;
        }
        ++points;
        const double fd2 = (l2_loss(model, y, xp) - l2_loss(model, y, xm)) / (2.0 * h);
        const double fd1 = (l1_loss(model, y, xp) - l1_loss(model, y, xm)) / (2.0 * h);
        const double an2 = dot(l2_gradient(model, y, x), dir);
        const double an1 = dot(l1_subgradient(model, y, x), dir);
        worst2 = std::max(worst2, std::fabs(an2 - fd2) / std::fabs(fd2));
        worst1 = std::max(worst1, std::fabs(an1 - fd1) / std::fabs(fd1));
    }
    return {worst2 <= 1e-4 && worst1 <= 1e-4,
            "max relative error L2 " + fmt("%.2g", worst2) + ", L1 " + fmt("%.2g", worst1)};
}

// ---------------------------------------------------------------- 10

Outcome determinism() {
    ExperimentConfig cfg = load_config("ct_views_sweep.json");
    cfg.views = {10};
    cfg.seeds = {3};
    cfg.max_iters = 200;
    for (SolverSpec& s : cfg.solvers) {
        s.max_iters = std::min(s.max_iters > 0 ? s.max_iters : 200, 200);
    }
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    run_experiment(cfg, a);
    run_experiment(cfg, b);
    int files = 0;
    int differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") {
            continue;
        }
        ++files;
        const fs::path other = b / fs::relative(e.path(), a);
        std::ifstream fa(e.path(), std::ios::binary);
        std::ifstream fb(other, std::ios::binary);
        const std::string sa{std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>()};
        const std::string sb{std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>()};
        differ += sa == sb ? 0 : 1;
    }
    fs::remove_all(a);
    fs::remove_all(b);
    return {files > 0 && differ == 0, std::to_string(files) + " CSV files compared, " + std::to_string(differ) + " differ"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> selected;
    app.add_option("--criterion", selected, "Criterion number (repeatable); all when omitted")
        ->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);
    if (selected.empty()) {
        selected.resize(10);
        std::iota(selected.begin(), selected.end(), 1);
    }
    const std::map<int, std::pair<const char*, Outcome (*)()>> table{
        {1, {"monotonicity", monotonicity}},
        {2, {"gaussian noiseless convergence", gaussian_convergence}},
        {3, {"linear-rate envelope", envelope}},
        {4, {"views sweep extremes", views_extremes}},
        {5, {"baseline parity at 10 views", parity}},
        {6, {"projection suite", projections}},
        {7, {"gamma star suite", gamma_suite}},
        {8, {"error term suite", error_terms}},
        {9, {"gradient checks", gradients}},
        {10, {"determinism", determinism}},
    };
    int failures = 0;
    for (int c : selected) {
        const auto& [name, fn] = table.at(c);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%s; %.1f s)\n", c, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
