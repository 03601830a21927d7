#include "polyct/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <stdexcept>

#include "polyct/errors.hpp"
#include "polyct/theory.hpp"

namespace polyct {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Shared bookkeeping: averaged iterate over the window ceil(T/2)..T,
// stopping rule, divergence guard and trace records.
class IterationDriver {
public:
    IterationDriver(const SolverConfig& cfg, const Vec& x1, const Vec* truth)
        : cfg_(cfg), truth_(truth), sum_(x1), avg_(x1), last_(x1),
          guard_(1e6 * std::max(norm2(x1), 1.0)), start_(std::chrono::steady_clock::now()) {
        window_.push_back(x1);
        if (truth_ && truth_->size() != x1.size()) {
            throw DimensionError("solver: truth and iterate differ in length");
        }
    }

    // Registers x_{T} after update k; returns true when the run should stop.
    bool push(int k, const Vec& x, double loss) {
        const double nx = norm2(x);
        if (!std::isfinite(nx) || nx > guard_) {
            throw DivergenceError("iterate norm exceeded divergence guard", k);
        }
        ++count_;
        double movement = 0.0;
        if (cfg_.averaging) {
            window_.push_back(x);
            for (std::size_t i = 0; i < x.size(); ++i) {
                sum_[i] += x[i];
            }
            const std::size_t start = (count_ + 1) / 2;  // ceil(T/2), 1-based
            while (first_ < start) {
                const Vec& old = window_.front();
                for (std::size_t i = 0; i < x.size(); ++i) {
                    sum_[i] -= old[i];
                }
                window_.pop_front();
                ++first_;
            }
            const double inv = 1.0 / static_cast<double>(window_.size());
            Vec avg(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                avg[i] = sum_[i] * inv;
            }
            movement = dist2(avg, avg_);
            avg_ = std::move(avg);
        } else {
            movement = dist2(x, last_);
        }
        last_ = x;

        TraceRecord rec;
        rec.iter = k;
        rec.dist_to_truth = truth_ ? dist2(x, *truth_) : kNaN;
        rec.avg_movement = movement;
        rec.loss = loss;
        if (cfg_.record_timing) {
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        }
        trace_.records.push_back(rec);
        trace_.iterations = k;

        if (truth_ && cfg_.truth_tol > 0.0 && rec.dist_to_truth <= cfg_.truth_tol) {
            trace_.converged = true;
            return true;
        }
        if (cfg_.truth_tol <= 0.0 && movement <= cfg_.convergence_tol) {
            trace_.converged = true;
            return true;
        }
        return false;
    }

    SolveResult finish() {
        SolveResult out;
        out.x = cfg_.averaging ? avg_ : last_;
        out.trace = std::move(trace_);
        out.trace.final_rmse = truth_ ? rmse(out.x, *truth_) : kNaN;
        return out;
    }

    SolverTrace& trace() { return trace_; }

private:
    const SolverConfig& cfg_;
    const Vec* truth_;
    std::deque<Vec> window_;
    std::size_t first_ = 1;
    std::size_t count_ = 1;
    Vec sum_;
    Vec avg_;
    Vec last_;
    double guard_;
    std::chrono::steady_clock::time_point start_;
    SolverTrace trace_;
};

void check_inputs(const ForwardModel& model, std::span<const double> y, const ConstraintSet& X,
                  const SolverConfig& cfg, std::span<const double> x1) {
    cfg.validate();
    if (y.size() != model.measurements()) {
        throw DimensionError("solver: expected " + std::to_string(model.measurements()) +
                             " measurements, got " + std::to_string(y.size()));
    }
    if (x1.size() != model.dim()) {
        throw DimensionError("solver: x1 has " + std::to_string(x1.size()) + " entries, expected " +
                             std::to_string(model.dim()));
    }
    X.validate(model.dim());
}

// Per-ray reduction w_i = sum over windows of coef(m), then A^T w * scale.
template <class Coef>
Vec backproject(const ForwardModel& model, double scale, Coef&& coef) {
    const std::size_t n = model.rows();
    Vec w(n, 0.0);
    for (std::size_t wi = 0; wi < model.windows(); ++wi) {
        for (std::size_t i = 0; i < n; ++i) {
            w[i] += coef(wi * n + i);
        }
    }
    for (double& v : w) {
        v *= scale;
    }
    return model.matrix().multiply_transpose(w);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct LogSumExp {
    double log_lambda;
    double mean_mu;
    double mean_mu2;
};

// log lambda(z) and moments of mu under weights c_j exp(-mu_j z) / lambda.
LogSumExp weighted_moments(const Spectrum& s, double z) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.bins(); ++j) {
        top = std::max(top, std::log(s.weights[j]) - s.attenuations[j] * z);
    }
    double total = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < s.bins(); ++j) {
        const double w = std::exp(std::log(s.weights[j]) - s.attenuations[j] * z - top);
        const double mu = s.attenuations[j];
        total += w;
        m1 += w * mu;
        m2 += w * mu * mu;
    }
    return {std::log(s.intensity) + top + std::log(total), m1 / total, m2 / total};
}

} // namespace

// ---------------------------------------------------------------- config

StepRule parse_step_rule(const std::string& name) {
    if (name == "fixed") return StepRule::fixed;
    if (name == "general") return StepRule::general;
    if (name == "positive_meas") return StepRule::positive_meas;
    if (name == "gaussian") return StepRule::gaussian;
    throw ConfigError("unknown step rule '" + name + "'");
}

std::string to_string(StepRule rule) {
    switch (rule) {
    case StepRule::fixed: return "fixed";
    case StepRule::general: return "general";
    case StepRule::positive_meas: return "positive_meas";
    case StepRule::gaussian: return "gaussian";
    }
    return "fixed";
}

void SolverConfig::validate() const {
    if (rule == StepRule::fixed && !(step_size > 0.0)) {
        throw std::invalid_argument("solver config: step_size must be > 0");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("solver config: max_iters must be >= 1");
    }
    if (!(convergence_tol > 0.0)) {
        throw std::invalid_argument("solver config: convergence_tol must be > 0");
    }
}

// --------------------------------------------------------------- helpers

Vec averaged_iterate(std::span<const Vec> history) {
    if (history.empty()) {
        throw std::invalid_argument("averaged_iterate: history is empty");
    }
    const std::size_t t = history.size();
    const std::size_t start = (t + 1) / 2;  // ceil(t/2), 1-based
    Vec out(history.front().size(), 0.0);
    for (std::size_t k = start; k <= t; ++k) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += history[k - 1][i];
        }
    }
    const double inv = 1.0 / static_cast<double>(t - start + 1);
    for (double& v : out) {
        v *= inv;
    }
    return out;
}

Vec operator_F(const SystemMatrix& A, const WindowedSpectra& spectra, const MeasurementSet& y,
               std::span<const double> x) {
    // Non-owning view; the model does not outlive this call.
    const ForwardModel model(std::shared_ptr<const SystemMatrix>(&A, [](const SystemMatrix*) {}), spectra);
    return model.operator_F(y.counts, x);
}

double step_size_rule(StepRule rule, const ForwardModel& model) {
    switch (rule) {
    case StepRule::general:
    case StepRule::positive_meas:
        return 1.0 / (4.0 * lipschitz_bound(model));
    case StepRule::gaussian: {
        const double n = static_cast<double>(model.rows());
        const double d = static_cast<double>(model.dim());
        return ((n + d) / n) / (40.0 * model.slope_bound());
    }
    case StepRule::fixed:
        break;
    }
    throw std::invalid_argument("step_size_rule: fixed steps carry their own value");
}

double resolve_step(const SolverConfig& cfg, const ForwardModel& model) {
    return cfg.rule == StepRule::fixed ? cfg.step_size : step_size_rule(cfg.rule, model);
}

double rmse(std::span<const double> x, std::span<const double> truth) {
    if (x.size() != truth.size() || x.empty()) {
        throw DimensionError("rmse: length mismatch");
    }
    return dist2(x, truth) / std::sqrt(static_cast<double>(x.size()));
}

double l2_loss(const ForwardModel& model, std::span<const double> y, std::span<const double> x) {
    const Vec proj = model.matrix().multiply(x);
    Vec mean(model.measurements());
    model.means(proj, mean);
    double s = 0.0;
    for (std::size_t m = 0; m < mean.size(); ++m) {
        const double r = mean[m] - y[m];
        s += r * r;
    }
    return s / static_cast<double>(mean.size());
}

Vec l2_gradient(const ForwardModel& model, std::span<const double> y, std::span<const double> x) {
    const Vec proj = model.matrix().multiply(x);
    Vec mean(model.measurements());
    Vec slope(model.measurements());
    model.means_and_slopes(proj, mean, slope);
    return backproject(model, 2.0 / static_cast<double>(mean.size()),
                       [&](std::size_t m) { return (mean[m] - y[m]) * slope[m]; });
}

double l1_loss(const ForwardModel& model, std::span<const double> y, std::span<const double> x) {
    const Vec proj = model.matrix().multiply(x);
    Vec mean(model.measurements());
    model.means(proj, mean);
    double s = 0.0;
    for (std::size_t m = 0; m < mean.size(); ++m) {
        s += std::fabs(mean[m] - y[m]);
    }
    return s / static_cast<double>(mean.size());
}

Vec l1_subgradient(const ForwardModel& model, std::span<const double> y, std::span<const double> x) {
    const Vec proj = model.matrix().multiply(x);
    Vec mean(model.measurements());
    Vec slope(model.measurements());
    model.means_and_slopes(proj, mean, slope);
    return backproject(model, 1.0 / static_cast<double>(mean.size()),
                       [&](std::size_t m) { return sign(mean[m] - y[m]) * slope[m]; });
}

double poisson_nll(const ForwardModel& model, std::span<const double> y, std::span<const double> x) {
    const Vec proj = model.matrix().multiply(x);
    const std::size_t n = model.rows();
    double s = 0.0;
    for (std::size_t m = 0; m < model.measurements(); ++m) {
        const LogSumExp l = weighted_moments(model.spectrum(m), proj[m % n]);
        s += std::exp(l.log_lambda) - (y[m] != 0.0 ? y[m] * l.log_lambda : 0.0);
    }
    return s / static_cast<double>(model.measurements());
}

// ------------------------------------------------------------------- EXACT

SolveResult exact_solve(const ForwardModel& model, std::span<const double> y, const ConstraintSet& X,
                        const SolverConfig& cfg, std::span<const double> x1, const Vec* truth) {
    check_inputs(model, y, X, cfg, x1);
    const double gamma = resolve_step(cfg, model);
    Projector P(X, cfg.dykstra_tol);
    Vec x = P(x1);
    IterationDriver driver(cfg, x, truth);

    Vec proj(model.rows());
    Vec mean(model.measurements());
    Vec g(model.dim());
    Vec trial(model.dim());
    for (int k = 1; k <= cfg.max_iters; ++k) {
        model.operator_F(y, x, proj, mean, g);
        const double loss = norm2(g);
        for (std::size_t i = 0; i < trial.size(); ++i) {
            trial[i] = x[i] - gamma * g[i];
        }
        const Vec half = P(trial);
        model.operator_F(y, half, proj, mean, g);
        for (std::size_t i = 0; i < trial.size(); ++i) {
            trial[i] = x[i] - gamma * g[i];
        }
        x = P(trial);
        if (driver.push(k, x, loss)) {
            break;
        }
    }
    return driver.finish();
}

// ------------------------------------------------------------------ MSE GD

SolveResult mse_gd_solve(const ForwardModel& model, std::span<const double> y, const ConstraintSet& X,
                         const SolverConfig& cfg, std::span<const double> x1, const Vec* truth) {
    check_inputs(model, y, X, cfg, x1);
    const double step = resolve_step(cfg, model);
    Projector P(X, cfg.dykstra_tol);
    Vec x = P(x1);
    IterationDriver driver(cfg, x, truth);

    Vec proj(model.rows());
    Vec mean(model.measurements());
    Vec slope(model.measurements());
    const double scale = 2.0 / static_cast<double>(model.measurements());
    for (int k = 1; k <= cfg.max_iters; ++k) {
        model.matrix().multiply(x, proj);
        model.means_and_slopes(proj, mean, slope);
        double loss = 0.0;
        for (std::size_t m = 0; m < mean.size(); ++m) {
            const double r = mean[m] - y[m];
            loss += r * r;
        }
        loss /= static_cast<double>(mean.size());
        const Vec grad = backproject(model, scale, [&](std::size_t m) { return (mean[m] - y[m]) * slope[m]; });
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] -= step * grad[i];
        }
        x = P(x);
        if (driver.push(k, x, loss)) {
            break;
        }
    }
    return driver.finish();
}

// --------------------------------------------------------------- PolyakSGM

double polyak_step(double loss, double oracle_loss, double grad_norm_sq, double fallback_c, int t) {
    if (loss > oracle_loss) {
        if (!(grad_norm_sq > 0.0)) {
            throw ConvergenceError("polyak: zero subgradient while loss exceeds the oracle loss");
        }
        return (loss - oracle_loss) / grad_norm_sq;
    }
    if (loss == oracle_loss) {
        return 0.0;
    }
    return fallback_c / static_cast<double>(std::max(t, 1));
}

SolveResult polyak_sgm_solve(const ForwardModel& model, std::span<const double> y,
                             const ConstraintSet& X, const SolverConfig& cfg,
                             std::span<const double> x1, double oracle_loss, const Vec* truth) {
    SolverConfig local = cfg;
    if (local.rule == StepRule::fixed && !(local.step_size > 0.0)) {
        local.step_size = 1.0;  // only seeds the fallback before any Polyak step is seen
    }
    check_inputs(model, y, X, local, x1);
    Projector P(X, cfg.dykstra_tol);
    Vec x = P(x1);
    IterationDriver driver(local, x, truth);

    Vec proj(model.rows());
    Vec mean(model.measurements());
    Vec slope(model.measurements());
    const double scale = 1.0 / static_cast<double>(model.measurements());
    double fallback_c = cfg.step_size > 0.0 ? cfg.step_size : 0.0;
    bool have_c = false;
    for (int k = 1; k <= cfg.max_iters; ++k) {
        model.matrix().multiply(x, proj);
        model.means_and_slopes(proj, mean, slope);
        double loss = 0.0;
        for (std::size_t m = 0; m < mean.size(); ++m) {
            loss += std::fabs(mean[m] - y[m]);
        }
        loss *= scale;
        const Vec g = backproject(model, scale, [&](std::size_t m) { return sign(mean[m] - y[m]) * slope[m]; });
        double gg = 0.0;
        for (double v : g) {
            gg += v * v;
        }
        const double step = polyak_step(loss, oracle_loss, gg, fallback_c, k);
        if (!have_c && loss > oracle_loss) {
            fallback_c = step;
            have_c = true;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] -= step * g[i];
        }
        x = P(x);
        if (driver.push(k, x, loss)) {
            break;
        }
    }
    return driver.finish();
}

// -------------------------------------------------------------------- ADMM

double admm_z_objective(std::span<const Spectrum* const> spectra, std::span<const double> y, double v,
                        double rho, double z) {
    double f = 0.5 * rho * (z - v) * (z - v);
    for (std::size_t w = 0; w < spectra.size(); ++w) {
        const LogSumExp l = weighted_moments(*spectra[w], z);
        f += std::exp(l.log_lambda) - (y[w] != 0.0 ? y[w] * l.log_lambda : 0.0);
    }
    return f;
}

double admm_z_update(std::span<const Spectrum* const> spectra, std::span<const double> y, double v,
                     double rho) {
    if (spectra.size() != y.size()) {
        throw DimensionError("admm_z_update: one count per window is required");
    }
    if (!(rho > 0.0)) {
        throw std::invalid_argument("admm_z_update: rho must be > 0");
    }
    auto derivs = [&](double z, double& f1, double& f2) {
        f1 = rho * (z - v);
        f2 = rho;
        for (std::size_t w = 0; w < spectra.size(); ++w) {
            const LogSumExp l = weighted_moments(*spectra[w], z);
            const double lambda = std::exp(l.log_lambda);
            const double var = std::max(0.0, l.mean_mu2 - l.mean_mu * l.mean_mu);
            f1 += (y[w] - lambda) * l.mean_mu;
            f2 += lambda * l.mean_mu2 - y[w] * var;
        }
    };

    double f_lo = 0.0;
    double f_hi = 0.0;
    double d2 = 0.0;
    double lo = v;
    double hi = v;
    derivs(v, f_lo, d2);
    if (f_lo == 0.0) {
        return v;
    }
    f_hi = f_lo;
    // Grow a bracket around v until phi' changes sign.
    for (double width = 1.0; !(f_lo < 0.0 && f_hi > 0.0); width *= 2.0) {
        if (width > 1e12) {
            throw ConvergenceError("admm_z_update: could not bracket the stationary point");
        }
        if (f_lo >= 0.0) {
            lo = v - width;
            derivs(lo, f_lo, d2);
        }
        if (f_hi <= 0.0) {
            hi = v + width;
            derivs(hi, f_hi, d2);
        }
    }

    // Safeguarded Newton: bisect whenever the Newton step leaves the bracket.
    double z = std::clamp(v, lo, hi);
    double f1 = 0.0;
    double f2 = 0.0;
    derivs(z, f1, f2);
    for (int it = 0; it < 200; ++it) {
        if (f1 == 0.0) {
            return z;
        }
        if (f1 < 0.0) {
            lo = z;
        } else {
            hi = z;
        }
        double next = (f2 > 0.0 && std::isfinite(f2)) ? z - f1 / f2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        const double dz = std::fabs(next - z);
        z = next;
        derivs(z, f1, f2);
        if (dz <= 1e-13 * std::max(1.0, std::fabs(z)) || hi - lo <= 1e-15 * std::max(1.0, std::fabs(z))) {
            return z;
        }
    }
    return z;
}

SolveResult admm_poisson_solve(const ForwardModel& model, std::span<const double> y,
                               const ConstraintSet& X, const SolverConfig& cfg,
                               std::span<const double> x1, const Vec* truth) {
    SolverConfig local = cfg;
    if (local.rule == StepRule::fixed && !(local.step_size > 0.0)) {
        local.step_size = 1.0;  // ADMM has no step; rho plays that role
    }
    check_inputs(model, y, X, local, x1);
    for (std::size_t m = 0; m < y.size(); ++m) {
        if (!(y[m] >= 0.0)) {
            throw std::invalid_argument("admm_poisson_solve: counts must be >= 0");
        }
    }
    const SystemMatrix& A = model.matrix();
    const std::size_t n = model.rows();
    const std::size_t d = model.dim();
    Projector P(X, cfg.dykstra_tol);
    Vec x = P(x1);
    IterationDriver driver(local, x, truth);

    Vec ax = A.multiply(x);
    Vec z = ax;
    Vec u(n, 0.0);
    Vec b(n);
    Vec r(n);
    Vec q(n);
    Vec s(d);
    Vec p(d);
    std::vector<const Spectrum*> ray_spectra(model.windows());
    Vec ray_counts(model.windows());

    // Start z at the data-fitted point near Ax1 so the first x-update moves.
    auto z_update = [&](const Vec& anchor) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t w = 0; w < model.windows(); ++w) {
                ray_spectra[w] = &model.spectrum(w * n + i);
                ray_counts[w] = y[w * n + i];
            }
            z[i] = admm_z_update(ray_spectra, ray_counts, anchor[i], cfg.admm_rho);
        }
    };
    z_update(ax);

    for (int k = 1; k <= cfg.max_iters; ++k) {
        // x-update: CGLS on min ||Ax - (z - u)||, warm-started, then project.
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = z[i] - u[i];
            r[i] = b[i] - ax[i];
        }
        A.multiply_transpose(r, s);
        p = s;
        double gamma = 0.0;
        for (double v : s) {
            gamma += v * v;
        }
        for (int it = 0; it < cfg.admm_cg_iters && gamma > 1e-300; ++it) {
            A.multiply(p, q);
            double qq = 0.0;
            for (double v : q) {
                qq += v * v;
            }
            if (!(qq > 0.0)) {
                break;
            }
            const double alpha = gamma / qq;
            for (std::size_t i = 0; i < d; ++i) {
                x[i] += alpha * p[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
                r[i] -= alpha * q[i];
            }
            A.multiply_transpose(r, s);
            double next = 0.0;
            for (double v : s) {
                next += v * v;
            }
            const double beta = next / gamma;
            gamma = next;
            for (std::size_t i = 0; i < d; ++i) {
                p[i] = s[i] + beta * p[i];
            }
        }
        x = P(x);
        A.multiply(x, ax);

        // z-update, one ray at a time.
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = ax[i] + u[i];
        }
        z_update(q);
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = ax[i] - z[i];
            u[i] += diff;
            res += diff * diff;
        }
        driver.trace().primal_residuals.push_back(std::sqrt(res));
        if (driver.push(k, x, poisson_nll(model, y, x))) {
            break;
        }
    }
    return driver.finish();
}

} // namespace polyct
