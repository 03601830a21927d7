#include "polyct/theory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "polyct/errors.hpp"

namespace polyct {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Gauss-Legendre rule on [-1, 1] computed by Newton iteration on P_n.
struct GaussRule {
    std::array<double, 20> nodes{};
    std::array<double, 20> weights{};

    GaussRule() {
        constexpr int n = 20;
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0;
                double p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-16) {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

const GaussRule& gauss_rule() {
    static const GaussRule rule;
    return rule;
}

template <class Fn>
double gauss_panel(const Fn& f, double a, double b) {
    const auto& g = gauss_rule();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        s += g.weights[i] * f(mid + half * g.nodes[i]);
    }
    return s * half;
}

template <class Fn>
double adaptive_gauss(const Fn& f, double a, double b, double whole, double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const double left = gauss_panel(f, a, mid);
    const double right = gauss_panel(f, mid, b);
    if (depth <= 0 || std::fabs(left + right - whole) <= tol) {
        return left + right;
    }
    return adaptive_gauss(f, a, mid, left, 0.5 * tol, depth - 1) +
           adaptive_gauss(f, mid, b, right, 0.5 * tol, depth - 1);
}

template <class Fn>
double integrate(const Fn& f, double a, double b, double tol) {
    return adaptive_gauss(f, a, b, gauss_panel(f, a, b), tol, 40);
}

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

constexpr double kOuterLimit = 12.0;
constexpr double kQuadTol = 1e-16;

} // namespace

// -------------------------------------------------------------- Lipschitz

double lambda_max_sigma(const SystemMatrix& A, double tol, int max_iters, std::uint64_t seed) {
    const std::size_t d = A.cols();
    const double n = static_cast<double>(A.rows());
    CounterRng rng(seed, 0x706f776572ULL);
    Vec v(d);
    for (double& x : v) {
        x = 1.0 + 0.1 * std::fabs(rng.normal());
    }
    double nv = norm2(v);
    for (double& x : v) {
        x /= nv;
    }
    Vec Av(A.rows());
    Vec w(d);
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        A.multiply(v, Av);
        A.multiply_transpose(Av, w);
        for (double& x : w) {
            x /= n;
        }
        const double next = dot(v, w);
        nv = norm2(w);
        if (nv == 0.0) {
            return 0.0;
        }
        for (std::size_t k = 0; k < d; ++k) {
            v[k] = w[k] / nv;
        }
        if (it > 0 && std::fabs(next - lambda) <= tol * std::fabs(next)) {
            return next;
        }
        lambda = next;
    }
    throw ConvergenceError("power method did not reach tolerance " + std::to_string(tol) + " in " +
                           std::to_string(max_iters) + " iterations");
}

double lipschitz_bound(const ForwardModel& model) {
    return lambda_max_sigma(model.matrix()) * model.slope_bound();
}

// ----------------------------------------------------------------- widths

double gaussian_width_ball(std::size_t d) {
    if (d < 2) {
        throw std::invalid_argument("gaussian_width_ball: d must be >= 2");
    }
    const double dd = static_cast<double>(d);
    return std::numbers::sqrt2 * std::exp(std::lgamma(0.5 * dd) - std::lgamma(0.5 * (dd - 1.0)));
}

double gaussian_width(const ConstraintSet& X, std::span<const double> x_star) {
    if (X.kind == ConstraintSet::Kind::l2_ball && X.center.size() == x_star.size()) {
        double off = 0.0;
        for (std::size_t k = 0; k < x_star.size(); ++k) {
            off = std::max(off, std::fabs(X.center[k] - x_star[k]));
        }
        if (off <= 1e-12 * std::max(1.0, norm2(x_star))) {
            return gaussian_width_ball(x_star.size());
        }
    }
    throw std::invalid_argument("gaussian_width: unsupported set without oracle (" + X.type_name() + ")");
}

WidthOracle ball_width_oracle(std::span<const double> x_star) {
    Vec u(x_star.begin(), x_star.end());
    const double nu = norm2(u);
    if (nu > 0.0) {
        for (double& v : u) {
            v /= nu;
        }
    }
    // Every direction is feasible in a ball around x_star, so the supremum is ||P g||.
    return [u](std::span<const double> g) {
        const double along = dot(u, g);
        const double total = dot(g, g);
        return std::sqrt(std::max(0.0, total - along * along));
    };
}

double gaussian_width_mc(const WidthOracle& oracle, std::size_t d, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc == 0) {
        throw std::invalid_argument("gaussian_width_mc: n_mc must be >= 1");
    }
    CounterRng rng(seed, 0x7769647468ULL);
    Vec g(d);
    double sum = 0.0;
    for (std::size_t s = 0; s < n_mc; ++s) {
        for (double& v : g) {
            v = rng.normal();
        }
        sum += oracle(g);
    }
    return sum / static_cast<double>(n_mc);
}

// ------------------------------------------------------------- gamma star

double inner_truncated_moment(double G) {
    const double b = 0.25 * std::fabs(G);
    const double a = -b;
    return (normal_cdf(b) - normal_cdf(a)) - (b * normal_pdf(b) - a * normal_pdf(a));
}

double psi(const Spectrum& spectrum, double x_star_norm, double gamma) {
    if (!(gamma >= 0.0)) {
        throw std::invalid_argument("psi: gamma must be >= 0");
    }
    const double scale = 6.0 * x_star_norm;
    auto integrand = [&](double G) {
        const double hp = scale > 0.0 ? spectrum.derivative_magnitude(scale * G) : spectrum.slope_sum();
        double ratio = 1.0;
        if (gamma > 0.0) {
            const double r = hp / (hp + gamma);
            ratio = r * r;
        }
        return ratio * inner_truncated_moment(G) * normal_pdf(G);
    };
    return integrate(integrand, 0.0, kOuterLimit, kQuadTol);
}

double gamma_star(const Spectrum& spectrum, double x_star_norm, double omega_bar, double n) {
    if (!(n > 0.0)) {
        throw std::invalid_argument("gamma_star: n must be positive");
    }
    const double target = 16.0 * omega_bar * omega_bar / n;
    const double psi0 = psi(spectrum, x_star_norm, 0.0);
    if (!(target < psi0)) {
        throw std::domain_error("sample size below fixed-point threshold (16 omega^2/n = " +
                                std::to_string(target) + " >= psi(0) = " + std::to_string(psi0) + ")");
    }
    double lo = 0.0;
    double hi = std::max(spectrum.slope_sum(), 1e-300);
    for (int k = 0; psi(spectrum, x_star_norm, hi) > target; ++k) {
        lo = hi;
        hi *= 2.0;
        if (k > 2000) {
            throw ConvergenceError("gamma_star: bracket did not close");
        }
    }
    const double tol = 1e-10 * target;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double resid = psi(spectrum, x_star_norm, mid) - target;
        if (std::fabs(resid) <= 0.5 * tol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * mid) {
            return mid;
        }
        if (resid > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double regime1_c0() { return inner_truncated_moment(1.0) * std::exp(-2.0) / std::sqrt(2.0 * std::numbers::pi); }

double regime1_constant() { return 64.0 / regime1_c0(); }

double regime1_bound(const Spectrum& spectrum, double x_star_norm) {
    double s = 0.0;
    for (std::size_t j = 0; j < spectrum.bins(); ++j) {
        const double mu = spectrum.attenuations[j];
        s += spectrum.weights[j] * mu * std::exp(-12.0 * mu * x_star_norm);
    }
    return s;
}

double regime2_factor(const Spectrum& spectrum, double x_star_norm) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t j = 0; j < spectrum.bins(); ++j) {
        const double sm = spectrum.weights[j] * spectrum.attenuations[j];
        s1 += sm;
        s2 += sm * sm;
    }
    const double m = spectrum.max_attenuation() * x_star_norm;
    return s1 * s1 / s2 * std::max(m * m * m * m, 1.0);
}

double doubling_search(const std::function<bool(double)>& pred, int max_doublings) {
    double c = 1.0;
    for (int k = 0; k <= max_doublings; ++k, c *= 2.0) {
        if (pred(c)) {
            return c;
        }
    }
    throw ConvergenceError("doubling_search: predicate never held");
}

double rho(const Spectrum& spectrum, double x_star_norm) {
    if (!(x_star_norm >= 0.0)) {
        throw std::invalid_argument("rho: x_star_norm must be >= 0");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < spectrum.bins(); ++j) {
        const double m = spectrum.attenuations[j] * x_star_norm;
        s += spectrum.weights[j] * spectrum.attenuations[j] / std::max(m * m * m * m, 1.0);
    }
    return 1.0 / s;
}

// ----------------------------------------------------------- restricted eigs

Vec sample_feasible(const ConstraintSet& X, std::span<const double> x_star, CounterRng& rng) {
    const std::size_t d = x_star.size();
    Vec x(d);
    switch (X.kind) {
    case ConstraintSet::Kind::l2_ball: {
        for (double& v : x) {
            v = rng.normal();
        }
        const double r = X.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / norm2(x);
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = X.center[k] + r * x[k];
        }
        return x;
    }
    case ConstraintSet::Kind::box:
        for (double& v : x) {
            v = X.lower + (X.upper - X.lower) * rng.uniform();
        }
        return x;
    default: {
        double sigma = 1.0;
        for (double v : x_star) {
            sigma = std::max(sigma, std::fabs(v));
        }
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = x_star[k] + sigma * rng.normal();
        }
        return project(X, x);
    }
    }
}

RestrictedEigs restricted_eigs(const SystemMatrix& A, const ConstraintSet& X,
                               std::span<const double> x_star, std::size_t n_samples,
                               std::uint64_t seed) {
    RestrictedEigs out;
    out.lambda_max = lambda_max_sigma(A, 1e-8, 20000, seed);
    CounterRng rng(seed, 0x6569677300ULL);
    const double n = static_cast<double>(A.rows());
    out.lambda_min_est = std::numeric_limits<double>::infinity();
    Vec diff(A.cols());
    Vec Av(A.rows());
    Vec w(A.cols());
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Vec x = sample_feasible(X, x_star, rng);
        const Vec xp = sample_feasible(X, x_star, rng);
        for (std::size_t k = 0; k < diff.size(); ++k) {
            diff[k] = x[k] - xp[k];
        }
        const double nd = norm2(diff);
        if (nd == 0.0) {
            continue;
        }
        A.multiply(diff, Av);
        A.multiply_transpose(Av, w);
        out.lambda_min_est = std::min(out.lambda_min_est, norm2(w) / n / nd);
    }
    if (!std::isfinite(out.lambda_min_est)) {
        out.lambda_min_est = 0.0;
    }
    return out;
}

double max_projection(const SystemMatrix& A, const ConstraintSet& X, std::span<const double> x_star,
                      std::size_t n_samples, std::uint64_t seed) {
    using Kind = ConstraintSet::Kind;
    double best = -std::numeric_limits<double>::infinity();
    auto over_rows = [&](auto&& fn) {
        for (std::size_t i = 0; i < A.rows(); ++i) {
            best = std::max(best, fn(i));
        }
        return best;
    };
    if (X.kind == Kind::l2_ball) {
        return over_rows([&](std::size_t i) {
            return A.row_dot(i, X.center) + X.radius * std::sqrt(A.row_norm_squared(i));
        });
    }
    if (X.kind == Kind::box) {
        return over_rows([&](std::size_t i) {
            double s = 0.0;
            A.for_each_in_row(i, [&](std::size_t, double a) { s += std::max(a * X.lower, a * X.upper); });
            return s;
        });
    }
    if (X.kind == Kind::nonneg) {
        throw std::invalid_argument("max_projection: the nonnegative orthant is unbounded");
    }
    if (X.kind == Kind::intersection && X.members.size() == 2 && A.min_entry() >= 0.0) {
        const ConstraintSet* ball = nullptr;
        bool has_nonneg = false;
        for (const auto& m : X.members) {
            if (m.kind == Kind::l2_ball) {
                ball = &m;
            }
            has_nonneg = has_nonneg || m.kind == Kind::nonneg;
        }
        const bool centered = ball && std::all_of(ball->center.begin(), ball->center.end(),
                                                  [](double c) { return c == 0.0; });
        if (has_nonneg && centered) {
            return over_rows([&](std::size_t i) { return ball->radius * std::sqrt(A.row_norm_squared(i)); });
        }
    }
    CounterRng rng(seed, 0x6d61787072ULL);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Vec x = sample_feasible(X, x_star, rng);
        const Vec ax = A.multiply(x);
        best = std::max(best, *std::max_element(ax.begin(), ax.end()));
    }
    return best;
}

double kappa(const SystemMatrix& A, const ConstraintSet& X, const Spectrum& spectrum,
             std::span<const double> x_star, std::size_t n_samples, std::uint64_t seed) {
    const RestrictedEigs eig = restricted_eigs(A, X, x_star, n_samples, seed);
    if (!(eig.lambda_min_est > 0.0)) {
        throw ConvergenceError("kappa: restricted eigenvalue not resolved");
    }
    const double m = std::max(0.0, max_projection(A, X, x_star, n_samples, seed));
    return std::exp(spectrum.max_attenuation() * m) * eig.lambda_max / eig.lambda_min_est;
}

// ------------------------------------------------------------- error terms

double err_term_ball(const ForwardModel& model, std::span<const double> y, std::span<const double> x_star) {
    return norm2(model.operator_F(y, x_star));
}

double expected_err_squared(const ForwardModel& model, std::span<const double> x_star) {
    const SystemMatrix& A = model.matrix();
    const Vec proj = A.multiply(x_star);
    Vec mean(model.measurements());
    model.means(proj, mean);
    const double n = static_cast<double>(model.measurements());
    double s = 0.0;
    for (std::size_t m = 0; m < mean.size(); ++m) {
        s += A.row_norm_squared(m % model.rows()) * mean[m];
    }
    return s / (n * n);
}

double gram_frobenius(const SystemMatrix& A) {
    Vec row(A.cols(), 0.0);
    Vec g(A.rows());
    double total = 0.0;
    for (std::size_t i = 0; i < A.rows(); ++i) {
        A.for_each_in_row(i, [&](std::size_t k, double v) { row[k] = v; });
        A.multiply(row, g);
        for (double v : g) {
            total += v * v;
        }
        A.for_each_in_row(i, [&](std::size_t k, double) { row[k] = 0.0; });
    }
    return std::sqrt(total);
}

double poisson_err_bound(const ForwardModel& model, std::span<const double> x_star, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("poisson_err_bound: delta must lie in (0, 1)");
    }
    const double n = static_cast<double>(model.measurements());
    const double first = std::sqrt(expected_err_squared(model, x_star) * n * n) / n;
    double i_max = 0.0;
    for (std::size_t m = 0; m < model.measurements(); ++m) {
        i_max = std::max(i_max, model.spectrum(m).intensity);
    }
    // Stacking W windows repeats every Gram entry W^2 times.
    const double frob = static_cast<double>(model.windows()) * gram_frobenius(model.matrix());
    constexpr double C = 1.0;
    return first + C * i_max * std::sqrt(frob) / n * std::log(2.0 / delta);
}

std::function<double(double)> theorem1_envelope(double nu, double L, double err, double x1_dist) {
    if (!(nu > 0.0) || nu > L) {
        throw std::invalid_argument("theorem1_envelope: requires 0 < nu <= L");
    }
    if (!(err >= 0.0)) {
        throw std::invalid_argument("theorem1_envelope: err must be >= 0");
    }
    const double base = 1.0 - nu / (8.0 * L);
    return [=](double t) { return std::pow(base, 0.5 * t) * x1_dist + 4.0 * err / nu; };
}

double empirical_nu(const ForwardModel& model, std::span<const double> x_star, const ConstraintSet& X,
                    std::size_t n_samples, std::uint64_t seed) {
    const Vec y = model.expected(x_star).counts;
    const Vec f_star = model.operator_F(y, x_star);
    CounterRng rng(seed, 0x6e75ULL);
    const std::size_t d = x_star.size();
    double best = std::numeric_limits<double>::infinity();
    Vec x(d);
    for (std::size_t s = 0; s < n_samples; ++s) {
        if (X.kind == ConstraintSet::Kind::l2_ball) {
            // Radius uniform in [0, R] so points near the center are well represented.
            for (double& v : x) {
                v = rng.normal();
            }
            const double r = X.radius * rng.uniform() / norm2(x);
            for (std::size_t k = 0; k < d; ++k) {
                x[k] = X.center[k] + r * x[k];
            }
        } else {
            x = sample_feasible(X, x_star, rng);
        }
        const Vec f = model.operator_F(y, x);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double dx = x[k] - x_star[k];
            num += (f[k] - f_star[k]) * dx;
            den += dx * dx;
        }
        if (den > 0.0) {
            best = std::min(best, num / den);
        }
    }
    return best;
}

} // namespace polyct
