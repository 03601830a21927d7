#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "polyct/constraints.hpp"
#include "polyct/forward.hpp"
#include "polyct/model.hpp"
#include "polyct/rng.hpp"
#include "polyct/system_matrix.hpp"

namespace polyct {

// Largest eigenvalue of Sigma = A^T A / n by power iteration. Throws
// ConvergenceError when the relative change does not reach tol.
double lambda_max_sigma(const SystemMatrix& A, double tol = 1e-8, int max_iters = 20000,
                        std::uint64_t seed = 0);

// L = lambda_max(Sigma) * sum_w max_i I sum_j s_j mu_j
double lipschitz_bound(const ForwardModel& model);

// ---------------------------------------------------------------- widths

// E||g_{d-1}||_2 = sqrt(2) Gamma(d/2) / Gamma((d-1)/2), d >= 2.
double gaussian_width_ball(std::size_t d);

// Closed form for an l2 ball centered at x_star; throws for other sets.
double gaussian_width(const ConstraintSet& X, std::span<const double> x_star);

// sup over the set of <P v, g> / ||P v|| for one Gaussian draw g.
using WidthOracle = std::function<double(std::span<const double> g)>;
WidthOracle ball_width_oracle(std::span<const double> x_star);
double gaussian_width_mc(const WidthOracle& oracle, std::size_t d, std::size_t n_mc,
                         std::uint64_t seed);

// ------------------------------------------------------------- gamma star

// int_{-G/4}^{G/4} t^2 phi(t) dt in closed form.
double inner_truncated_moment(double G);

// Left side of the fixed-point equation.
double psi(const Spectrum& spectrum, double x_star_norm, double gamma);

// Root of psi(gamma) = 16 omega^2 / n. Throws std::domain_error when the
// target is at or above psi(0).
double gamma_star(const Spectrum& spectrum, double x_star_norm, double omega_bar, double n);

// c0 = I(1) e^{-2} / sqrt(2 pi) and the explicit regime-1 constant 64 / c0.
double regime1_c0();
double regime1_constant();
// sum_j s_j mu_j exp(-12 mu_j ||x*||)
double regime1_bound(const Spectrum& spectrum, double x_star_norm);
// (sum s mu)^2 / (sum s^2 mu^2) * max((mu_max ||x*||)^4, 1); multiply by C omega^2.
double regime2_factor(const Spectrum& spectrum, double x_star_norm);

// Smallest C = 2^k (k = 0..max_doublings) with pred(C) true; throws when none.
double doubling_search(const std::function<bool(double)>& pred, int max_doublings = 60);

double rho(const Spectrum& spectrum, double x_star_norm);

// ----------------------------------------------------------- restricted eigs

struct RestrictedEigs {
    double lambda_max = 0.0;
    // Upper estimate of lambda_min(Sigma, X - X) from sampled pairs.
    double lambda_min_est = 0.0;
};

// Random feasible point: exact uniform sampling for balls and boxes,
// projection of a Gaussian perturbation of x_star otherwise.
Vec sample_feasible(const ConstraintSet& X, std::span<const double> x_star, CounterRng& rng);

RestrictedEigs restricted_eigs(const SystemMatrix& A, const ConstraintSet& X,
                               std::span<const double> x_star, std::size_t n_samples,
                               std::uint64_t seed);

// max_i sup_{x in X} <a_i, x>: exact for balls, boxes and nonneg
// intersected with a centered ball when A >= 0; sampled otherwise.
double max_projection(const SystemMatrix& A, const ConstraintSet& X, std::span<const double> x_star,
                      std::size_t n_samples, std::uint64_t seed);

// Estimate of exp(mu_max max<a_i,x>) lambda_max / lambda_min_est.
double kappa(const SystemMatrix& A, const ConstraintSet& X, const Spectrum& spectrum,
             std::span<const double> x_star, std::size_t n_samples, std::uint64_t seed);

// ------------------------------------------------------------- error terms

// ||F(x_star)||_2
double err_term_ball(const ForwardModel& model, std::span<const double> y,
                     std::span<const double> x_star);
// E[Err^2] = (1/n^2) sum_m ||a_m||^2 I_m h_m(<a_m, x_star>) under Poisson noise.
double expected_err_squared(const ForwardModel& model, std::span<const double> x_star);
// sqrt(sum_m I_m ||a_m||^2 h_m)/n + C I_max sqrt(||A A^T||_F)/n log(2/delta), C = 1.
double poisson_err_bound(const ForwardModel& model, std::span<const double> x_star, double delta);
// ||A A^T||_F computed one row at a time.
double gram_frobenius(const SystemMatrix& A);

// t -> (1 - nu/(8L))^{t/2} x1_dist + 4 err / nu
std::function<double(double)> theorem1_envelope(double nu, double L, double err, double x1_dist);

// Minimum over sampled x in X of <F(x) - F(x*), x - x*> / ||x - x*||^2 on
// noiseless data (an upper estimate of nu).
double empirical_nu(const ForwardModel& model, std::span<const double> x_star, const ConstraintSet& X,
                    std::size_t n_samples, std::uint64_t seed);

} // namespace polyct
